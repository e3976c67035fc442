"""The 1-D three-component Gaussian mixture benchmark."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STDS = (1.0, 2.0, 3.0)


@dataclass(frozen=True)
class MoGSpec:
    means: tuple[float, ...]
    stds: tuple[float, ...]
    priors: tuple[float, ...]

    def __post_init__(self):
        k = len(self.means)
        if len(self.stds) != k or len(self.priors) != k:
            raise ValueError("means, stds and priors must have equal length")
        if any(s <= 0 for s in self.stds):
            raise ValueError("standard deviations must be positive")
        if any(p < 0 for p in self.priors) or abs(sum(self.priors) - 1.0) > 1e-12:
            raise ValueError("priors must be non-negative and sum to 1")
        if any(b <= a for a, b in zip(self.means, self.means[1:])):
            raise ValueError("means must be strictly increasing")

    @property
    def n_classes(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class LabeledBatch:
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        if self.xs.shape != self.ys.shape:
            raise ValueError("xs and ys must have equal length")

    def __len__(self):
        return len(self.xs)


def make_spec(d_m: float) -> MoGSpec:
    """Means ``[0, d_m, 2 d_m]``, standard deviations ``[1, 2, 3]``, uniform priors."""
    if not d_m > 0:
        raise ValueError(f"d_m must be positive, got {d_m}")
    k = len(STDS)
    return MoGSpec(tuple(i * float(d_m) for i in range(k)), STDS, (1.0 / k,) * k)


def sample(spec: MoGSpec, n: int, rng: np.random.Generator) -> LabeledBatch:
    if n <= 0:
        raise ValueError("n must be positive")
    ys = rng.choice(spec.n_classes, size=n, p=spec.priors)
    return LabeledBatch(sample_class(spec, ys, rng), ys)


def sample_class(spec: MoGSpec, ys: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one value per label in ``ys`` from the matching component."""
    means = np.asarray(spec.means)[ys]
    stds = np.asarray(spec.stds)[ys]
    return means + stds * rng.standard_normal(len(ys))


def pdf(spec: MoGSpec, x, y: int):
    if not 0 <= y < spec.n_classes:
        raise ValueError(f"invalid class {y}")
    mu, sd = spec.means[y], spec.stds[y]
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * ((x - mu) / sd) ** 2) / (sd * np.sqrt(2 * np.pi))


def marginal_pdf(spec: MoGSpec, x):
    return sum(p * pdf(spec, x, y) for y, p in enumerate(spec.priors))
