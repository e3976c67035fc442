"""Alternating-step GAN training on the mixture benchmark."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from threadpoolctl import threadpool_limits

from . import models as M
from .diffcore import AdamState, adam_step
from .divergences import frechet_1d
from .losses import Batch, LossKind, LossVariant, Models, compute_losses
from .metrics import KernelSpec, block_kernel_sums, fit_gaussian, mmd2_from_sums
from .mog import LabeledBatch, MoGSpec, make_spec, marginal_pdf, sample, sample_class

log = logging.getLogger(__name__)

HIST_SAMPLES = 10_000
HIST_BINS = 120


class ConfigError(ValueError):
    """Invalid training or sweep configuration; ``field`` names the culprit."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    variant: str = "p2gan"
    activation: str = "bce"
    d_m: float = 1.0
    batch_size: int = 128
    iterations: int = 5000
    d_steps_per_g: int = 1
    eval_every: int = 500
    eval_samples: int = 3000
    seed: int = 0
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    noise_dim: int = 2
    embed_dim: int = 2
    hidden: int = 16

    def __post_init__(self):
        self.validate()

    def validate(self):
        try:
            self.loss_variant()
        except ValueError as exc:
            raise ConfigError("variant", str(exc)) from None
        for name in ("batch_size", "iterations", "d_steps_per_g", "eval_every",
                     "noise_dim", "embed_dim", "hidden"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(name, f"must be an integer >= 1, got {v!r}")
        if not isinstance(self.eval_samples, (int, np.integer)) or self.eval_samples < 2:
            raise ConfigError("eval_samples", "must be an integer >= 2")
        if self.eval_every > self.iterations:
            raise ConfigError("eval_every", "must not exceed iterations")
        if not self.d_m > 0:
            raise ConfigError("d_m", "must be positive")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise ConfigError("seed", "must be an integer")
        for name in ("lr", "eps"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be positive")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(name, "must lie in [0, 1)")

    def loss_variant(self) -> LossVariant:
        return LossVariant.parse(self.variant, self.activation)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        """Build from a config document; a missing ``eval_every`` is capped at ``iterations``."""
        known = {f.name for f in dataclasses.fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(key, "unknown configuration field")
        doc = dict(doc)
        iterations = doc.get("iterations", cls.iterations)
        if "eval_every" not in doc and isinstance(iterations, int):
            doc["eval_every"] = min(cls.eval_every, iterations)
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class Metrics:
    mmd: dict[str, float]
    fid: dict[str, float]
    degenerate: list[int] = field(default_factory=list)

    def to_dict(self):
        return {"mmd": self.mmd, "fid": self.fid, "degenerate": self.degenerate}


def evaluate(generator: Callable, spec: MoGSpec, n_per_class: int, rng: np.random.Generator,
             kernel: KernelSpec | None = None, real: dict[int, np.ndarray] | None = None
             ) -> Metrics:
    """Per-class and marginal MMD plus per-class 1-D FID of a sampler.

    ``generator(labels, rng)`` returns one value per label.  Real samples are
    drawn fresh from ``spec`` unless supplied in ``real`` (class -> values).
    """
    if n_per_class < 2:
        raise ValueError("n_per_class must be at least 2")
    kernel = kernel or KernelSpec()
    K = spec.n_classes
    if real is None:
        real = {c: sample_class(spec, np.full(n_per_class, c), rng) for c in range(K)}
    fake = {c: np.asarray(generator(np.full(n_per_class, c), rng), dtype=np.float64)
            for c in range(K)}
    groups = np.arange(K + 1) * n_per_class
    r = np.concatenate([real[c] for c in range(K)])
    f = np.concatenate([fake[c] for c in range(K)])
    srr = block_kernel_sums(r, r, kernel, groups, groups, symmetric=True)
    sff = block_kernel_sums(f, f, kernel, groups, groups, symmetric=True)
    srf = block_kernel_sums(r, f, kernel, groups, groups)
    nk = len(kernel.bandwidths)
    mmd = {str(c): mmd2_from_sums(srr[c, c], sff[c, c], srf[c, c], n_per_class, n_per_class, nk)
           for c in range(K)}
    n = K * n_per_class
    mmd["M"] = mmd2_from_sums(srr.sum(), sff.sum(), srf.sum(), n, n, nk)
    fid, degenerate = {}, []
    for c in range(K):
        mu_r, sd_r = fit_gaussian(real[c])
        mu_f, sd_f = fit_gaussian(fake[c])
        if sd_f == 0.0:
            degenerate.append(c)
        fid[str(c)] = frechet_1d(mu_r, sd_r, mu_f, sd_f)
    fid["max"] = max(fid[str(c)] for c in range(K))
    return Metrics(mmd, fid, degenerate)


@dataclass
class RunResult:
    config: dict
    config_digest: str
    seed: int
    mmd: dict[str, float]
    fid: dict[str, float]
    initial: dict
    history: list[dict]
    lambda_trace: list[float] | None
    histogram: dict
    degenerate: list[int]
    wall_clock_seconds: float = 0.0

    def to_dict(self, timing=True) -> dict:
        d = dataclasses.asdict(self)
        if not timing:
            d.pop("wall_clock_seconds")
        return d

    def to_json(self, timing=True) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        return cls(**d)

    def history_csv(self) -> str:
        cols = ["mmd_0", "mmd_1", "mmd_2", "mmd_M", "fid_0", "fid_1", "fid_2", "fid_max"]
        lines = ["iteration," + ",".join(cols)]
        for h in self.history:
            vals = [h["mmd"][c[4:]] for c in cols[:4]] + [h["fid"][c[4:]] for c in cols[4:]]
            lines.append(f"{h['iteration']}," + ",".join(repr(float(v)) for v in vals))
        return "\n".join(lines) + "\n"


def histogram_bins(spec: MoGSpec) -> np.ndarray:
    lo = spec.means[0] - 4 * max(spec.stds)
    hi = spec.means[-1] + 4 * max(spec.stds)
    return np.linspace(lo, hi, HIST_BINS + 1)


class GANTrainer:
    """Owns the networks, optimisers and random streams of one run.

    ``real_sampler(n, rng)`` supplies labelled real minibatches; it defaults
    to fresh draws from the mixture described by ``config.d_m``.
    """

    def __init__(self, config: TrainConfig, real_sampler=None, n_classes=None):
        self.config = config
        self.variant = config.loss_variant()
        self.spec = make_spec(config.d_m)
        self.n_classes = n_classes or self.spec.n_classes
        self.real_sampler = real_sampler or (lambda n, rng: sample(self.spec, n, rng))
        streams = np.random.SeedSequence(config.seed).spawn(4)
        init_rng, self.data_rng, self.noise_rng, self.eval_rng = (
            np.random.default_rng(s) for s in streams)
        self.gen = M.init_generator(init_rng, self.n_classes, config.noise_dim,
                                    config.embed_dim, config.hidden)
        self.disc = M.init_discriminator(init_rng, self.n_classes, config.hidden,
                                         self.variant.lambda_init())
        self.models = Models(self.gen, self.disc)
        opt = dict(lr=config.lr, beta1=config.beta1, beta2=config.beta2, eps=config.eps)
        self.d_opt, self.g_opt = AdamState(**opt), AdamState(**opt)
        self.iteration = 0
        self.lambda_trace: list[float] = []

    def _fake_part(self, n):
        z = self.noise_rng.standard_normal((n, self.config.noise_dim))
        y = self.noise_rng.integers(0, self.n_classes, n)
        return z, y

    def _check(self, report, which):
        total = report.d_total if which == "d" else report.g_total
        if not np.isfinite(total.data).all():
            comps = {k: float(v.data) for k, v in report.components.items()}
            raise TrainingDiverged(f"non-finite {which}-loss at iteration {self.iteration}: {comps}")

    def d_step(self, step: int):
        n = self.config.batch_size
        real = self.real_sampler(n, self.data_rng)
        z, y = self._fake_part(n)
        report = compute_losses(self.variant, self.models, Batch(real, z, y, step), parts=("d",))
        self._check(report, "d")
        self.disc.zero_grad()
        report.d_total.backward()
        adam_step(self.d_opt, self.disc.arrays, self.disc.grads())
        return report

    def g_step(self, step: int):
        n = self.config.batch_size
        z, y = self._fake_part(n)
        dummy = LabeledBatch(np.zeros(n), np.zeros(n, dtype=np.intp))
        report = compute_losses(self.variant, self.models, Batch(dummy, z, y, step), parts=("g",))
        self._check(report, "g")
        self.gen.zero_grad()
        report.g_total.backward()
        adam_step(self.g_opt, self.gen.arrays, self.gen.grads())
        return report

    def step(self):
        """One generator update preceded by ``d_steps_per_g`` discriminator updates."""
        t = self.iteration
        for _ in range(self.config.d_steps_per_g):
            report = self.d_step(t)
        if "lambda_mean" in report.diagnostics:
            self.lambda_trace.append(report.diagnostics["lambda_mean"])
        self.g_step(t)
        self.iteration += 1

    def evaluate(self) -> Metrics:
        return evaluate(M.sampler(self.gen), self.spec, self.config.eval_samples, self.eval_rng)

    def histogram(self) -> dict:
        edges = histogram_bins(self.spec)
        labels = self.eval_rng.integers(0, self.n_classes, HIST_SAMPLES)
        values = M.sampler(self.gen)(labels, self.eval_rng)
        counts = {str(c): np.histogram(values[labels == c], edges)[0].tolist()
                  for c in range(self.n_classes)}
        return {"edges": [edges[0], edges[-1], HIST_BINS], "counts": counts}

    def run(self) -> RunResult:
        cfg = self.config
        started = time.perf_counter()
        with threadpool_limits(1):
            initial = self.evaluate()
            history = []
            while self.iteration < cfg.iterations:
                self.step()
                if self.iteration % cfg.eval_every == 0 or self.iteration == cfg.iterations:
                    m = self.evaluate()
                    entry = {"iteration": self.iteration, **m.to_dict()}
                    if self.lambda_trace:
                        entry["lambda"] = self.lambda_trace[-1]
                    history.append(entry)
                    log.debug("iter %d mmd_M %.5f", self.iteration, m.mmd["M"])
            hist = self.histogram()
        final = history[-1]
        return RunResult(
            config=cfg.to_dict(), config_digest=cfg.digest(), seed=cfg.seed,
            mmd=final["mmd"], fid=final["fid"], initial=initial.to_dict(), history=history,
            lambda_trace=self.lambda_trace or None, histogram=hist,
            degenerate=final["degenerate"],
            wall_clock_seconds=time.perf_counter() - started)


def train_run(config: TrainConfig) -> RunResult:
    return GANTrainer(config).run()


def true_density_curve(spec: MoGSpec, grid):
    return marginal_pdf(spec, grid)


__all__ = ["TrainConfig", "RunResult", "GANTrainer", "train_run", "evaluate", "Metrics",
           "ConfigError", "TrainingDiverged", "LossKind"]
