"""f-divergence generator functions and exact divergences on small supports."""
from __future__ import annotations

import enum

import numpy as np

from . import diffcore as dc

LOG_RATIO_CLAMP = 30.0


class FDivergenceKind(str, enum.Enum):
    REVERSE_KL = "reverse-kl"
    KL = "kl"
    PEARSON_CHI2 = "pearson"
    SQUARED_HELLINGER = "hellinger"
    JENSEN_SHANNON = "js"
    GAN = "gan"


class ActivationKind(str, enum.Enum):
    SOFTPLUS_BCE = "bce"
    HINGE = "hinge"


def _xlogx(u):
    return u * np.log(u)


# generator functions f(u), u > 0
F_GENERATORS = {
    FDivergenceKind.REVERSE_KL: lambda u: -np.log(u),
    FDivergenceKind.KL: _xlogx,
    FDivergenceKind.PEARSON_CHI2: lambda u: (u - 1.0) ** 2,
    FDivergenceKind.SQUARED_HELLINGER: lambda u: (np.sqrt(u) - 1.0) ** 2,
    FDivergenceKind.JENSEN_SHANNON: lambda u: -(u + 1.0) * np.log((1.0 + u) / 2.0) + _xlogx(u),
    FDivergenceKind.GAN: lambda u: _xlogx(u) - (u + 1.0) * np.log(u + 1.0),
}


def _fexp_reverse_kl(t):
    return dc.neg(t)


def _fexp_kl(t):
    return t * dc.exp(t)


def _fexp_pearson(t):
    d = dc.exp(t) - 1.0
    return d * d


def _fexp_hellinger(t):
    d = dc.exp(t * 0.5) - 1.0
    return d * d


def _fexp_js(t):
    # log((1 + e^t) / 2) = softplus(t) - log 2
    return t * dc.exp(t) - (dc.exp(t) + 1.0) * (dc.softplus(t) - np.log(2.0))


def _fexp_gan(t):
    return t * dc.exp(t) - (dc.exp(t) + 1.0) * dc.softplus(t)


# f(exp(t)) written directly in the log-ratio t, differentiable through diffcore
F_OF_EXP = {
    FDivergenceKind.REVERSE_KL: _fexp_reverse_kl,
    FDivergenceKind.KL: _fexp_kl,
    FDivergenceKind.PEARSON_CHI2: _fexp_pearson,
    FDivergenceKind.SQUARED_HELLINGER: _fexp_hellinger,
    FDivergenceKind.JENSEN_SHANNON: _fexp_js,
    FDivergenceKind.GAN: _fexp_gan,
}


def f_generator(kind, u, table=None):
    u = np.asarray(u, dtype=np.float64)
    if np.any(u <= 0):
        raise ValueError("generator functions are defined for u > 0 only")
    out = (table or F_GENERATORS)[FDivergenceKind(kind)](u)
    return float(out) if out.ndim == 0 else out


def f_of_exp(kind, t, table=None):
    """``f(exp(t))`` with ``t`` clamped to [-30, 30].

    Accepts a float/array (returns the same) or a :class:`Tensor`
    (returns a differentiable tensor).
    """
    fn = (table or F_OF_EXP)[FDivergenceKind(kind)]
    if isinstance(t, dc.Tensor):
        return fn(dc.clip(t, -LOG_RATIO_CLAMP, LOG_RATIO_CLAMP))
    t = np.clip(np.asarray(t, dtype=np.float64), -LOG_RATIO_CLAMP, LOG_RATIO_CLAMP)
    out = fn(dc.Tensor(t)).data
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# categorical divergences


def as_categorical(p, tol=1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > tol:
        raise ValueError(f"not a categorical distribution: {p}")
    return p


def kl_categorical(p, q) -> float:
    p, q = as_categorical(p), as_categorical(q)
    if p.shape != q.shape:
        raise ValueError("p and q have different support sizes")
    support = p > 0
    if np.any(q[support] == 0):
        raise ValueError("KL(p||q) undefined: p is not absolutely continuous w.r.t. q")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def jsd_categorical(p, q) -> float:
    p, q = as_categorical(p), as_categorical(q)
    m = 0.5 * (p + q)
    return 0.5 * kl_categorical(p, m) + 0.5 * kl_categorical(q, m)


def tv_categorical(p, q) -> float:
    p, q = as_categorical(p), as_categorical(q)
    return 0.5 * float(np.abs(p - q).sum())


def frechet_1d(mu1, sigma1, mu2, sigma2) -> float:
    """Squared Frechet distance between two 1-D Gaussians."""
    if sigma1 < 0 or sigma2 < 0:
        raise ValueError("standard deviations must be non-negative")
    return float((mu1 - mu2) ** 2 + (sigma1 - sigma2) ** 2)
