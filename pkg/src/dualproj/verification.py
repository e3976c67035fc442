"""Self-contained numerical checks behind the ``verify`` command."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import diffcore as dc
from . import models as M
from . import oracle as O
from .divergences import FDivergenceKind, f_generator, f_of_exp
from .losses import (Batch, LossKind, LossVariant, Models, ce_loss, compute_losses,
                     loss_fcgan, loss_p2gan, loss_p2gan_weighted, loss_projgan, loss_tacgan)
from .mog import LabeledBatch

IDENTITY_TOL = 1e-12
MARGIN_TOL = -1e-10
FEXP_TOL = 1e-9
GRAD_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"[{status}] {self.name}: worst={self.worst:.3e}{extra}"


# ---------------------------------------------------------------------------
# oracle sweeps


def check_posterior_reassembly(rng, n):
    worst = 0.0
    for _ in range(n):
        nx, ny = rng.integers(1, 6, size=2)
        joint = O.random_joint(rng, nx, ny, 0.5)
        px, post = O.posterior_from_joint(joint)
        worst = max(worst, float(np.abs(O.DiscreteJoint.from_parts(px, post).table
                                        - joint.table).max()))
    return CheckResult("posterior reassembly", worst <= 1e-14, worst)


def check_lemma1(rng, n):
    worst = math.inf
    for _ in range(n):
        nx, ny = rng.integers(1, 6, size=2)
        gap = O.lemma1_gap(O.random_joint(rng, nx, ny), O.random_conditional(rng, nx, ny))
        worst = min(worst, gap)
    return CheckResult("Bayes classifier optimality (gap >= 0)", worst >= -IDENTITY_TOL, worst)


def check_prop1(rng, n):
    worst = 0.0
    for _ in range(n):
        nx, ny = rng.integers(1, 6, size=2)
        P, Q = O.random_joint(rng, nx, ny), O.random_joint(rng, nx, ny)
        D = rng.uniform(0.01, 0.99, size=(nx, ny))
        worst = max(worst, O.prop1_identity(P, Q, D).difference)
    return CheckResult("per-class value-function identity", worst < IDENTITY_TOL, worst)


def check_prop2(rng, n):
    worst = 0.0
    for _ in range(n):
        nx, ny = rng.integers(1, 6, size=2)
        rep = O.prop2_identity(O.random_conditional(rng, nx, ny),
                               O.random_conditional(rng, nx, ny),
                               O.random_categorical(rng, nx))
        worst = max(worst, rep.difference)
    return CheckResult("classifier-gap / reverse-KL identity", worst < IDENTITY_TOL, worst)


def check_theorem(rng, n):
    worst, chain_ok = math.inf, True
    for _ in range(n):
        rep = O.theorem1_bound(*O.random_theorem_instance(rng))
        worst = min(worst, rep.margin)
        steps = list(rep.chain.values())
        chain_ok &= all(a <= b + 1e-12 for a, b in zip(steps, steps[1:]))
    return CheckResult("joint JSD upper bound (min margin)", worst >= MARGIN_TOL and chain_ok,
                       worst, "" if chain_ok else "intermediate chain violated")


def check_sandwich(rng, n):
    worst, ok = math.inf, True
    for _ in range(n):
        k = int(rng.integers(2, 8))
        rep = O.pinsker_sandwich(O.random_categorical(rng, k, 0.5),
                                 O.random_categorical(rng, k, 0.5))
        ok &= rep.passed
        worst = min(worst, math.sqrt(rep.kl / 2) - rep.tv, rep.jsd - 0.5 * rep.tv**2,
                    2 * rep.tv - rep.jsd)
    return CheckResult("Pinsker and JSD-TV sandwich (min slack)", ok, worst)


# ---------------------------------------------------------------------------
# f-divergence table


def check_f_at_one(table=None):
    worst, bad = 0.0, []
    for kind in FDivergenceKind:
        want = -math.log(4.0) if kind is FDivergenceKind.GAN else 0.0
        err = abs(f_generator(kind, 1.0, table) - want)
        worst = max(worst, err)
        if err > IDENTITY_TOL:
            bad.append(kind.value)
    return CheckResult("generator values at u = 1", not bad, worst,
                       f"failed: {', '.join(bad)}" if bad else "")


def check_f_of_exp(f_table=None, fexp_table=None):
    t = np.linspace(-10.0, 10.0, 401)
    worst, bad = 0.0, []
    for kind in FDivergenceKind:
        a = f_of_exp(kind, t, fexp_table)
        b = f_generator(kind, np.exp(t), f_table)
        err = float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))
        worst = max(worst, err)
        if err > FEXP_TOL:
            bad.append(kind.value)
    return CheckResult("f(exp(t)) matches f at exp(t)", not bad, worst,
                       f"failed: {', '.join(bad)}" if bad else "")


# ---------------------------------------------------------------------------
# gradient checks


def _small_models(seed, hidden=4, n_classes=3, lam_init=0.0):
    rng = np.random.default_rng(seed)
    gen = M.init_generator(rng, n_classes, noise_dim=2, embed_dim=2, hidden=hidden)
    disc = M.init_discriminator(rng, n_classes, hidden=hidden, lam_init=lam_init)
    # non-zero biases and gate so every head carries a generic gradient
    for p in (gen, disc):
        for k, v in p.arrays.items():
            if k.startswith(("b", "psi_b", "uncond_b", "gate_b")):
                v += rng.normal(0.0, 0.1, size=v.shape)
    return Models(gen, disc)


def random_batch(rng, n=8, n_classes=3, noise_dim=2, step=0) -> Batch:
    real = LabeledBatch(rng.normal(0.0, 2.0, n), rng.integers(0, n_classes, n))
    return Batch(real, rng.standard_normal((n, noise_dim)), rng.integers(0, n_classes, n), step)


def check_grad_mlp(seed=0):
    rng = np.random.default_rng(seed)
    params = {"W1": dc.Tensor(rng.normal(size=(3, 5)), requires_grad=True),
              "b1": dc.Tensor(rng.normal(size=5), requires_grad=True),
              "W2": dc.Tensor(rng.normal(size=(5, 1)), requires_grad=True),
              "b2": dc.Tensor(rng.normal(size=1), requires_grad=True)}
    x = rng.normal(size=(6, 3))

    def fn(p, x):
        h = dc.relu(dc.Tensor(x) @ p["W1"] + p["b1"])
        return dc.mean(dc.softplus(h @ p["W2"] + p["b2"]))
    rep = dc.grad_check(dc.Graph(fn, params, [x.shape]), (x,), GRAD_TOL)
    return CheckResult("gradient: 2-layer MLP", rep.passed, rep.max_rel_error,
                       "; ".join(rep.failures))


def check_grad_dual_logit(seed=1):
    models = _small_models(seed)
    rng = np.random.default_rng(seed)
    x, y = rng.normal(0.0, 2.0, 6), rng.integers(0, 3, 6)
    graph = dc.Graph(lambda p: dc.sum(M.dual_proj_logit(models.disc, x, y)),
                     models.disc.tensors)
    rep = dc.grad_check(graph, (), GRAD_TOL)
    return CheckResult("gradient: dual-projection logit", rep.passed, rep.max_rel_error,
                       "; ".join(rep.failures))


def gradient_variants():
    names = ["projgan", "dmgan", "acgan", "tacgan", "p2gan", "p2gan-d:1000"]
    names += [f"fcgan:{k.value}" for k in FDivergenceKind]
    names += [k.value for k in LossKind
              if k.value.startswith("p2gan-") and k is not LossKind.P2GAN_D]
    return names


def check_grad_losses(names=None, activations=("bce", "hinge"), seed=2):
    worst, failures, n = 0.0, [], 0
    for act in activations:
        for name in names or gradient_variants():
            variant = LossVariant.parse(name, act)
            models = _small_models(seed, lam_init=variant.lambda_init())
            batch = random_batch(np.random.default_rng(seed), step=7)
            for side, params in (("d", models.disc), ("g", models.gen)):
                def fn(p, side=side):
                    rep = compute_losses(variant, models, batch, parts=(side,))
                    return rep.d_total if side == "d" else rep.g_total
                rep = dc.grad_check(dc.Graph(fn, params.tensors), (), GRAD_TOL)
                n += 1
                worst = max(worst, rep.max_rel_error)
                failures += [f"{name}/{act}/{side} {f}" for f in rep.failures]
    return CheckResult(f"gradient: {n} loss graphs", not failures, worst,
                       "; ".join(failures[:5]))


# ---------------------------------------------------------------------------
# loss reductions


def _d_adv(rep):
    return rep.components["d_adv_real"].item() + rep.components["d_adv_fake"].item()


def loss_reduction_errors(rng, activation="bce") -> dict[str, float]:
    """Absolute discrepancies of the exact reductions between loss families."""
    models = _small_models(int(rng.integers(1 << 31)), hidden=8)
    batch = random_batch(rng, n=32)
    tied = models.disc.arrays["Vp"] - models.disc.arrays["Vq"]
    proj = loss_projgan(models, batch, activation, tied_V=tied)
    p2 = loss_p2gan(models, batch, activation)
    out = {"p2gan_minus_ce_d": abs(_d_adv(p2) - proj.d_total.item()),
           "p2gan_g": abs(p2.g_total.item() - proj.g_total.item())}
    for kind in ("p2gan-s", "p2gan-sp", "p2gan-a", "p2gan-ap"):
        w = loss_p2gan_weighted(models, batch, LossVariant.parse(kind, activation),
                                lam_override=0.0)
        key = kind.replace("-", "_")
        out[f"{key}_lambda0_d"] = abs(w.d_total.item() - proj.d_total.item())
        out[f"{key}_lambda0_g"] = abs(w.g_total.item() - proj.g_total.item())
    tac = loss_tacgan(models, batch, activation, parts=("d",))
    fc = loss_fcgan(models, batch, activation, FDivergenceKind.REVERSE_KL)
    xf = M.generate(models.gen, batch.noise, batch.fake_labels).data
    lp_fake = ce_loss(models.disc, "p", xf, batch.fake_labels).item()
    lq_fake = ce_loss(models.disc, "q", xf, batch.fake_labels).item()
    out["tacgan_minus_fcgan_d"] = abs(tac.d_total.item() - fc.d_total.item() - lp_fake)
    out["fcgan_reverse_kl_g"] = abs(fc.components["g_f_term"].item() - (lp_fake - lq_fake))
    return out


def check_loss_reductions(seed=3, n_batches=20):
    rng = np.random.default_rng(seed)
    worst, worst_key = 0.0, ""
    for act in ("bce", "hinge"):
        for _ in range(n_batches):
            for k, v in loss_reduction_errors(rng, act).items():
                if v > worst:
                    worst, worst_key = v, f"{k}/{act}"
    return CheckResult("loss-family reductions", worst <= IDENTITY_TOL, worst,
                       f"worst at {worst_key}" if worst_key else "")


def check_decay_schedule(T=250.0, steps=(0, 1, 10, 100, 1000)):
    variant = LossVariant.parse(f"p2gan-d:{T:g}")
    worst = 0.0
    for t in steps:
        models = _small_models(0)
        rep = compute_losses(variant, models, random_batch(np.random.default_rng(t), step=t),
                             parts=("d",))
        worst = max(worst, abs(rep.diagnostics["lambda_mean"] - math.exp(-t / T)))
    return CheckResult("decay gate schedule", worst <= IDENTITY_TOL, worst)


# ---------------------------------------------------------------------------


def run_checks(n_instances=1000, seed=0, f_table=None, fexp_table=None,
               progress: Callable[[CheckResult], None] | None = None) -> list[CheckResult]:
    """Run every check; ``f_table``/``fexp_table`` substitute the f-divergence tables."""
    rng = np.random.default_rng(seed)
    suite = [
        lambda: check_posterior_reassembly(rng, n_instances),
        lambda: check_lemma1(rng, n_instances),
        lambda: check_prop1(rng, n_instances),
        lambda: check_prop2(rng, n_instances),
        lambda: check_theorem(rng, n_instances),
        lambda: check_sandwich(rng, n_instances),
        lambda: check_f_at_one(f_table),
        lambda: check_f_of_exp(f_table, fexp_table),
        check_grad_mlp,
        check_grad_dual_logit,
        check_grad_losses,
        check_loss_reductions,
        check_decay_schedule,
    ]
    results = []
    for fn in suite:
        start = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # a crashing check is a failing check
            res = CheckResult(getattr(fn, "__name__", "check"), False, math.nan,
                              f"{type(exc).__name__}: {exc}")
        res.detail = (res.detail + f" ({time.perf_counter() - start:.1f}s)").strip()
        results.append(res)
        if progress:
            progress(res)
    return results
