import pytest

CRITERIA: dict[int, str] = {}


@pytest.fixture
def record(capsys):
    """Record (and immediately print) one PASS/FAIL line for an acceptance criterion."""
    def emit(number: int, passed: bool, detail: str):
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        CRITERIA[number] = line
        with capsys.disabled():
            print("\n" + line)
        return passed
    return emit


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
