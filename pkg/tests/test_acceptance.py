"""End-to-end acceptance criteria, each at its stated tolerance.

Criterion 3 trains 120 runs; completed run files are cached in
``acceptance_runs/quick`` (override with ``DUALPROJ_ACCEPTANCE_DIR``) and
re-used, since every file embeds and is checked against its config digest.
Delete the directory to retrain from scratch.
"""
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

import reference_tables as ref
from dualproj import cli
from dualproj.losses import VARIANT_NAMES
from dualproj.trainer import TrainConfig, train_run
from dualproj.verification import loss_reduction_errors, run_checks

ROOT = Path(__file__).resolve().parents[1]
QUICK_CONFIG = ROOT / "acceptance_runs" / "quick_sweep.json"


def quick_dir() -> Path:
    return Path(os.environ.get("DUALPROJ_ACCEPTANCE_DIR", ROOT / "acceptance_runs" / "quick"))


def test_criterion_1_verification_suite(record):
    start = time.perf_counter()
    results = run_checks(n_instances=1000)
    elapsed = time.perf_counter() - start
    failed = [r.line() for r in results if not r.passed]
    ok = not failed and elapsed < 60
    record(1, ok, f"{len(results) - len(failed)}/{len(results)} checks passed in "
                  f"{elapsed:.1f}s (limit 60s) {'; '.join(failed)}")
    assert ok


def test_criterion_2_loss_reductions(record):
    rng = np.random.default_rng(2024)
    worst, where = 0.0, ""
    for activation in ("bce", "hinge"):
        for _ in range(50):
            for key, err in loss_reduction_errors(rng, activation).items():
                if err > worst:
                    worst, where = err, f"{key}/{activation}"
    ok = worst <= 1e-12
    record(2, ok, f"worst discrepancy {worst:.2e} ({where or 'none'}) over 100 batches, "
                  f"tolerance 1e-12")
    assert ok


@pytest.fixture(scope="module")
def quick_results():
    doc = json.loads(QUICK_CONFIG.read_text())
    doc["output_dir"] = str(quick_dir())
    cfg = cli.SweepConfig.from_dict(doc).with_preset("quick")
    failures = cli.run_sweep(cfg, out=lambda *_: None)
    return cfg, failures, cli.load_results(cfg.output_dir)


def test_criterion_3_quick_preset_ranks(record, quick_results):
    cfg, failures, results = quick_results
    table = cli.aggregate(results)
    ranks = cli.rank_tables(table, methods=cfg.methods)["bce"].average
    rank_ok = ranks["p2gan"] < ranks["projgan"]
    fid_wins = [(d, table[("p2gan", "bce", d, "FIDmax")][0],
                 table[("projgan", "bce", d, "FIDmax")][0]) for d in cfg.d_m]
    n_wins = sum(p2 <= proj for _, p2, proj in fid_wins)
    ok = failures == 0 and len(results) == 120 and rank_ok and n_wins >= 2
    ranks_txt = ", ".join(f"{m}={v:.3f}" for m, v in ranks.items())
    fid_txt = ", ".join(f"d_m={d:g}: {p2:.4g} vs {proj:.4g}" for d, p2, proj in fid_wins)
    record(3, ok, f"(a) average MMD ranks {ranks_txt} -> p2gan better than projgan: "
                  f"{rank_ok}; (b) top-90% max-FID p2gan vs projgan {fid_txt} -> "
                  f"{n_wins}/3 settings (need 2); {len(results)} runs, {failures} failed")
    assert ok


def test_criterion_4_published_ranks(record, tmp_path):
    ref.write_synthetic_results(tmp_path)
    ranks = cli.write_report(tmp_path, plots=False, out=lambda *_: None)["ranks"]["overall"]
    got = [ranks.average[m] for m in ref.METHODS]
    want = ref.PUBLISHED_RANKS["overall"]
    err = max(abs(a - b) for a, b in zip(got, want))
    ok = err <= 0.01
    record(4, ok, f"overall ranks {'/'.join(f'{v:.3f}' for v in got)} vs published "
                  f"{'/'.join(f'{v:.2f}' for v in want)}, max error {err:.3f} (tolerance 0.01)")
    assert ok


def test_criterion_5_determinism(record, tmp_path):
    cfg = TrainConfig(variant="p2gan-ap", d_m=2.0, iterations=300, eval_every=100,
                      eval_samples=500, seed=11)
    runs_identical = train_run(cfg).to_json(timing=False) == train_run(cfg).to_json(timing=False)

    def sweep(name, workers):
        sc = cli.SweepConfig(methods=["p2gan", "tacgan"], d_m=[1.0, 4.0], runs_per_setting=2,
                             output_dir=str(tmp_path / name),
                             overrides={"iterations": 100, "eval_samples": 300})
        assert cli.run_sweep(sc, workers=workers, out=lambda *_: None) == 0
        out = {}
        for p in sorted(Path(sc.output_dir).glob("*.json")):
            doc = json.loads(p.read_text())
            doc.pop("wall_clock_seconds")
            out[p.name] = doc
        return out
    serial, parallel = sweep("w1", 1), sweep("w4", 4)
    sweep_identical = len(serial) == 8 and serial == parallel
    ok = runs_identical and sweep_identical
    record(5, ok, f"repeated run byte-identical: {runs_identical}; 8-run sweep with 1 vs 4 "
                  f"workers identical: {sweep_identical}")
    assert ok


def criterion_6_methods():
    names = []
    for name in VARIANT_NAMES:
        if name == "fcgan:<fdiv>":
            names.append("fcgan:reverse-kl")
        elif name == "p2gan-d:<T>":
            names.append("p2gan-d:500")
        else:
            names.append(name)
    return names


def test_criterion_6_every_variant_trains(record, tmp_path):
    methods = criterion_6_methods()
    assert len(methods) == 15
    sc = cli.SweepConfig(methods=methods, activations=["bce", "hinge"], d_m=[2.0],
                         runs_per_setting=1, output_dir=str(tmp_path),
                         overrides={"iterations": 1500, "eval_every": 1500})
    start = time.perf_counter()
    failures = cli.run_sweep(sc, out=lambda *_: None)
    elapsed = time.perf_counter() - start
    bad = []
    for job in sc.jobs():
        if not job.path.exists():
            bad.append(f"{job.method}/{job.activation}: non-finite loss")
            continue
        res = json.loads(job.path.read_text())
        final, initial = res["mmd"]["M"], res["initial"]["mmd"]["M"]
        if not final < initial:
            bad.append(f"{job.method}/{job.activation}: MMD_M {final:.4f} >= initial {initial:.4f}")
    ok = failures == 0 and not bad
    record(6, ok, f"{30 - len(bad)}/30 variant x activation runs improved on iteration 0 in "
                  f"{elapsed / 60:.1f} min; failures: {'; '.join(bad) or 'none'}")
    assert ok
