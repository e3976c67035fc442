"""Command-line entry point: ``run``, ``sweep``, ``report`` and ``verify``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import time
import traceback
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .losses import LossVariant
from .metrics import rank_methods, top_fraction_mean
from .mog import make_spec, marginal_pdf, pdf
from .trainer import ConfigError, RunResult, TrainConfig, TrainingDiverged, train_run

log = logging.getLogger("dualproj")

EXIT_OK, EXIT_RUN_FAILURE, EXIT_CONFIG = 0, 1, 2
WORKERS_ENV = "DUALPROJ_WORKERS"
MMD_COLUMNS = ("0", "1", "2", "M")
REPORT_COLUMNS = MMD_COLUMNS + ("FIDmax",)
QUICK_PRESET = {"runs_per_setting": 10, "d_m": [1.0, 3.0, 5.0], "iterations": 3000}
DEFAULT_METHODS = ["projgan", "tacgan", "fcgan:reverse-kl", "p2gan"]


@dataclass
class SweepConfig:
    methods: list[str] = field(default_factory=lambda: list(DEFAULT_METHODS))
    activations: list[str] = field(default_factory=lambda: ["bce"])
    d_m: list[float] = field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0, 5.0])
    runs_per_setting: int = 100
    base_seed: int = 0
    parallelism: int = 1
    output_dir: str = "results"
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.runs_per_setting, int) or self.runs_per_setting < 1:
            raise ConfigError("runs_per_setting", "must be an integer >= 1")
        if not isinstance(self.parallelism, int) or self.parallelism < 1:
            raise ConfigError("parallelism", "must be an integer >= 1")
        for name in ("methods", "activations", "d_m"):
            if not isinstance(getattr(self, name), list) or not getattr(self, name):
                raise ConfigError(name, "must be a non-empty list")
        banned = {"variant", "activation", "d_m", "seed"} & set(self.overrides)
        if banned:
            raise ConfigError("overrides", f"cannot override {sorted(banned)}")
        # validates every method string and the overrides in one go
        for job in self.jobs():
            job.config()

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(key, "unknown sweep configuration field")
        return cls(**doc)

    def with_preset(self, preset: str | None) -> "SweepConfig":
        if preset is None:
            return self
        if preset != "quick":
            raise ConfigError("preset", f"unknown preset {preset!r}; available: quick")
        overrides = dict(self.overrides, iterations=QUICK_PRESET["iterations"],
                         eval_every=QUICK_PRESET["iterations"])
        return dataclasses.replace(self, runs_per_setting=QUICK_PRESET["runs_per_setting"],
                                   d_m=list(QUICK_PRESET["d_m"]), overrides=overrides)

    def jobs(self) -> list["Job"]:
        return [Job(m, a, float(d), self.base_seed + r, dict(self.overrides), self.output_dir)
                for m in self.methods for a in self.activations for d in self.d_m
                for r in range(self.runs_per_setting)]


@dataclass
class Job:
    method: str
    activation: str
    d_m: float
    seed: int
    overrides: dict
    output_dir: str

    def config(self) -> TrainConfig:
        doc = dict(self.overrides, variant=self.method, activation=self.activation,
                   d_m=self.d_m, seed=self.seed)
        return TrainConfig.from_dict(doc)

    @property
    def path(self) -> Path:
        return Path(self.output_dir) / result_filename(self.config())


def result_filename(cfg: TrainConfig) -> str:
    method = LossVariant.parse(cfg.variant, cfg.activation).name.replace(":", "-")
    return f"{method}_{cfg.activation}_{cfg.d_m:g}_{cfg.seed}.json"


def _write_atomic(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def execute_job(job: Job) -> tuple[str, bool, str]:
    """Train one run and write its file; returns (path, ok, message)."""
    cfg = job.config()
    path = job.path
    try:
        result = train_run(cfg)
    except (TrainingDiverged, FloatingPointError) as exc:
        failed = path.with_name(path.stem + ".failed.json")
        _write_atomic(failed, json.dumps({"config": cfg.to_dict(), "error": str(exc),
                                          "traceback": traceback.format_exc()}, indent=1))
        return str(path), False, str(exc)
    _write_atomic(path, result.to_json())
    return str(path), True, f"mmd_M={result.mmd['M']:.5f} fid_max={result.fid['max']:.5f}"


def worker_count(cfg: SweepConfig) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(WORKERS_ENV, f"must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(WORKERS_ENV, "must be >= 1")
        return n
    return cfg.parallelism


def run_sweep(cfg: SweepConfig, workers: int | None = None, out=print) -> int:
    """Execute pending jobs; returns the number of failed runs."""
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    jobs = cfg.jobs()
    pending = [j for j in jobs if not j.path.exists()]
    out(f"{len(jobs)} runs, {len(jobs) - len(pending)} already complete, "
        f"{len(pending)} to execute")
    workers = workers or worker_count(cfg)
    failures = 0
    if workers == 1 or len(pending) <= 1:
        results = map(execute_job, pending)
        for path, ok, msg in results:
            failures += not ok
            out(f"{'ok' if ok else 'FAILED'} {Path(path).name} {msg}")
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for path, ok, msg in pool.map(execute_job, pending):
                failures += not ok
                out(f"{'ok' if ok else 'FAILED'} {Path(path).name} {msg}")
    return failures


# ---------------------------------------------------------------------------
# report


class ReportError(ValueError):
    pass


def load_results(directory) -> list[RunResult]:
    d = Path(directory)
    if not d.is_dir():
        raise ReportError(f"{d} is not a directory")
    results = []
    for p in sorted(d.glob("*.json")):
        if p.name.endswith(".failed.json"):
            continue
        try:
            res = RunResult.from_dict(json.loads(p.read_text()))
            cfg = TrainConfig.from_dict(res.config)
        except (ValueError, TypeError) as exc:
            raise ReportError(f"{p.name}: unreadable result ({exc})") from None
        if cfg.digest() != res.config_digest:
            raise ReportError(f"{p.name}: config digest mismatch")
        if result_filename(cfg) != p.name:
            raise ReportError(f"{p.name}: file name does not match embedded config")
        results.append(res)
    if not results:
        raise ReportError(f"no run results in {d}")
    return results


def _setting(res: RunResult):
    cfg = res.config
    return (LossVariant.parse(cfg["variant"], cfg["activation"]).name, cfg["activation"],
            float(cfg["d_m"]))


def _column_value(res: RunResult, column: str) -> float:
    return res.fid["max"] if column == "FIDmax" else res.mmd[column]


def aggregate(results, reducer=top_fraction_mean) -> dict[tuple, tuple[float, int]]:
    """(method, activation, d_m, column) -> (aggregated value, n_runs)."""
    cells = defaultdict(list)
    for res in results:
        key = _setting(res)
        for column in REPORT_COLUMNS:
            cells[key + (column,)].append(_column_value(res, column))
    order = sorted(cells, key=lambda k: (k[:3], REPORT_COLUMNS.index(k[3])))
    return {k: (float(reducer(cells[k])), len(cells[k])) for k in order}


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v: float) -> str:
    return repr(float(v))


def rank_tables(table: dict, methods=None, columns=MMD_COLUMNS):
    """Rank tables per activation and overall from aggregated MMD cells."""
    methods = methods or sorted({k[0] for k in table})
    activations = sorted({k[1] for k in table})
    out = {}
    all_rows, all_settings = [], []
    for act in activations:
        rows, settings = [], []
        for d_m in sorted({k[2] for k in table if k[1] == act}):
            for col in columns:
                keys = [(m, act, d_m, col) for m in methods]
                if all(k in table for k in keys):
                    rows.append([table[k][0] for k in keys])
                    settings.append((act, d_m, col))
                else:
                    log.warning("skipping incomplete setting %s d_m=%g column %s", act, d_m, col)
        if rows:
            out[act] = rank_methods(rows, methods, settings)
            all_rows += rows
            all_settings += settings
    if all_rows:
        out["overall"] = rank_methods(all_rows, methods, all_settings)
    return out


def _plot_histograms(results, directory: Path) -> list[Path]:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "dualproj"
    first = {}
    for res in sorted(results, key=lambda r: r.seed):
        first.setdefault(_setting(res), res)
    paths = []
    for (method, act, d_m), res in sorted(first.items()):
        spec = make_spec(d_m)
        lo, hi, bins = res.histogram["edges"]
        edges = np.linspace(lo, hi, int(bins) + 1)
        width = edges[1] - edges[0]
        grid = np.linspace(lo, hi, 600)
        counts = {int(c): np.asarray(v, dtype=float) for c, v in res.histogram["counts"].items()}
        total = sum(v.sum() for v in counts.values())
        fig, ax = plt.subplots(figsize=(6, 3.2))
        bottom = np.zeros(len(edges) - 1)
        for c in sorted(counts):
            h = counts[c] / (total * width)
            ax.bar(edges[:-1], h, width=width, bottom=bottom, align="edge",
                   alpha=0.5, label=f"generated y={c}")
            bottom += h
            ax.plot(grid, spec.priors[c] * pdf(spec, grid, c), lw=1)
        ax.plot(grid, marginal_pdf(spec, grid), "k", lw=1.5, label="true density")
        ax.set_title(f"{method} ({act}), d_m={d_m:g}, seed {res.seed}")
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = directory / f"hist_{method.replace(':', '-')}_{act}_{d_m:g}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths


def write_report(directory, plots=True, out=print) -> dict:
    d = Path(directory)
    results = load_results(d)
    report_dir = d / "report"
    report_dir.mkdir(exist_ok=True)
    header = ["method", "activation", "d_m", "column", "value", "n_runs"]
    top = aggregate(results)
    means = aggregate(results, np.mean)
    for name, table in (("summary.csv", top), ("summary_all_runs.csv", means)):
        rows = [[m, a, f"{dm:g}", c, _fmt(v), n] for (m, a, dm, c), (v, n) in table.items()]
        (report_dir / name).write_text(_csv_text(header, rows))
    ranks = rank_tables(top)
    for key, rt in ranks.items():
        rows = [[a, f"{dm:g}", c] + [_fmt(r) for r in row]
                for (a, dm, c), row in zip(rt.settings, rt.ranks)]
        rows.append(["average", "", ""] + [_fmt(v) for v in rt.average.values()])
        (report_dir / f"ranks_{key}.csv").write_text(
            _csv_text(["activation", "d_m", "column"] + rt.methods, rows))
        out(f"average MMD rank ({key}): "
            + ", ".join(f"{m}={v:.3f}" for m, v in rt.average.items()))
    files = plots and _plot_histograms(results, report_dir) or []
    out(f"report written to {report_dir} ({len(results)} runs, {len(files)} plots)")
    return {"summary": top, "summary_all_runs": means, "ranks": ranks, "plots": files}


# ---------------------------------------------------------------------------
# commands


def _load_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return doc


def cmd_run(args) -> int:
    cfg = TrainConfig.from_dict(_load_json(args.config))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / result_filename(cfg)
    try:
        result = train_run(cfg)
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    _write_atomic(path, result.to_json())
    if args.history_csv:
        Path(args.history_csv).write_text(result.history_csv())
    for k, v in result.mmd.items():
        print(f"mmd_{k} {v:.6f}")
    for k, v in result.fid.items():
        print(f"fid_{k} {v:.6f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = SweepConfig.from_dict(_load_json(args.config)).with_preset(args.preset)
    if args.output_dir:
        cfg = dataclasses.replace(cfg, output_dir=args.output_dir)
    failures = run_sweep(cfg)
    if failures:
        print(f"{failures} run(s) failed", file=sys.stderr)
        return EXIT_RUN_FAILURE
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        write_report(args.dir, plots=not args.no_plots)
    except ReportError as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_checks
    start = time.perf_counter()
    results = run_checks(n_instances=args.instances, progress=lambda r: print(r.line(),
                                                                             flush=True))
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed "
          f"in {time.perf_counter() - start:.1f}s")
    return EXIT_OK if n_fail == 0 else EXIT_RUN_FAILURE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualproj", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="train a single configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--out-dir", default=".")
    r.add_argument("--history-csv")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="train every method x activation x d_m x seed")
    s.add_argument("--config", required=True)
    s.add_argument("--preset", choices=["quick"])
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_sweep)
    rep = sub.add_parser("report", help="aggregate a results directory")
    rep.add_argument("--dir", required=True)
    rep.add_argument("--no-plots", action="store_true")
    rep.set_defaults(func=cmd_report)
    v = sub.add_parser("verify", help="run the numerical verification suite")
    v.add_argument("--instances", type=int, default=1000)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
