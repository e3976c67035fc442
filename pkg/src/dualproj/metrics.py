"""Sample-based metrics, run aggregation and method ranking."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_BANDWIDTHS = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


@dataclass(frozen=True)
class KernelSpec:
    """Sum of Gaussian RBF kernels ``exp(-(x - y)^2 / (2 s^2))`` over bandwidths ``s``."""

    bandwidths: tuple[float, ...] = DEFAULT_BANDWIDTHS

    def __post_init__(self):
        if not self.bandwidths or any(not b > 0 for b in self.bandwidths):
            raise ValueError("need at least one positive bandwidth")

    def gammas(self) -> np.ndarray:
        return 1.0 / (2.0 * np.asarray(self.bandwidths, dtype=np.float64) ** 2)

    def __call__(self, x, y):
        d2 = (np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)) ** 2
        return sum(np.exp(-g * d2) for g in self.gammas())


_CHUNK = 16


def _exp_plan(gammas):
    """Order of evaluation; a gamma four times the previous one reuses e**4."""
    order = np.argsort(gammas)
    plan, prev = [], None
    for i in order:
        g = gammas[i]
        plan.append((i, prev is not None and abs(g - 4.0 * prev) <= 1e-12 * g))
        prev = g
    return plan


def block_kernel_sums(x, y, kernel: KernelSpec, x_groups=None, y_groups=None,
                      symmetric=False) -> np.ndarray:
    """Kernel sums ``S[a, b] = sum_{i in group a, j in group b} k(x_i, y_j)``.

    Groups are contiguous index ranges given as boundary arrays
    (``[0, n1, n1 + n2, ...]``).  With ``symmetric=True`` (``x is y``) only
    the upper triangle is evaluated.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    xg = np.asarray([0, len(x)] if x_groups is None else x_groups)
    yg = np.asarray([0, len(y)] if y_groups is None else y_groups)
    gammas = kernel.gammas()
    plan = _exp_plan(gammas)
    out = np.zeros((len(xg) - 1, len(yg) - 1))
    buf = np.empty((_CHUNK, len(y)))
    work = np.empty_like(buf)
    for a in range(len(xg) - 1):
        for start in range(xg[a], xg[a + 1], _CHUNK):
            stop = min(start + _CHUNK, xg[a + 1])
            n = stop - start
            col0 = start if symmetric else 0
            d2 = np.subtract.outer(x[start:stop], y[col0:], out=buf[:n, :len(y) - col0])
            np.multiply(d2, d2, out=d2)
            e = work[:n, :len(y) - col0]
            total = np.zeros(len(yg) - 1)
            for i, reuse in plan:
                if reuse:
                    np.multiply(e, e, out=e)
                    np.multiply(e, e, out=e)
                else:
                    np.multiply(d2, -gammas[i], out=e)
                    np.exp(e, out=e)
                total += _group_sums(e, yg, col0, symmetric, n, a)
            out[a] += total
    if symmetric:
        out = out + out.T - np.diag(np.diag(out))
    return out


def _group_sums(e, yg, col0, symmetric, n, row_group):
    """Column-group sums of one chunk of kernel values.

    In symmetric mode the chunk's own square is complete, while pairs to its
    right inside the same group stand for two entries of the full matrix;
    pairs in later groups are mirrored by the caller.
    """
    cols = e.sum(axis=0)
    if symmetric:
        cols = cols.copy()
        cols[n:yg[row_group + 1] - col0] *= 2.0
    sums = np.empty(len(yg) - 1)
    for b in range(len(yg) - 1):
        lo, hi = max(yg[b] - col0, 0), max(yg[b + 1] - col0, 0)
        sums[b] = cols[lo:hi].sum()
    return sums


def _check_samples(a, name):
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.size < 2:
        raise ValueError(f"{name} needs at least 2 samples")
    return a


def mmd2(a, b, kernel: KernelSpec | None = None, mode="biased") -> float:
    """Squared maximum mean discrepancy between 1-D samples ``a`` and ``b``."""
    kernel = kernel or KernelSpec()
    a, b = _check_samples(a, "a"), _check_samples(b, "b")
    saa = block_kernel_sums(a, a, kernel, symmetric=True)[0, 0]
    sbb = block_kernel_sums(b, b, kernel, symmetric=True)[0, 0]
    sab = block_kernel_sums(a, b, kernel)[0, 0]
    return mmd2_from_sums(saa, sbb, sab, len(a), len(b), len(kernel.bandwidths), mode)


def mmd2_from_sums(saa, sbb, sab, m, n, k_diag, mode="biased") -> float:
    if mode == "biased":
        return float(saa / m**2 + sbb / n**2 - 2.0 * sab / (m * n))
    if mode == "unbiased":
        return float((saa - m * k_diag) / (m * (m - 1)) + (sbb - n * k_diag) / (n * (n - 1))
                     - 2.0 * sab / (m * n))
    raise ValueError(f"mode must be 'biased' or 'unbiased', got {mode!r}")


def fit_gaussian(samples) -> tuple[float, float]:
    """Maximum-likelihood mean and (population) standard deviation."""
    s = np.asarray(samples, dtype=np.float64).reshape(-1)
    if s.size < 2:
        raise ValueError("need at least 2 samples")
    mu = float(s.mean())
    return mu, float(np.sqrt(np.mean((s - mu) ** 2)))


def top_fraction_mean(values, fraction=0.9) -> float:
    """Mean of the best (smallest) ``ceil(fraction * n)`` values."""
    v = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if v.size == 0:
        raise ValueError("empty input")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    k = max(1, math.ceil(fraction * v.size - 1e-9))
    return float(v[:k].mean())


@dataclass
class RankTable:
    methods: list[str]
    settings: list[tuple]
    ranks: np.ndarray  # (n_settings, n_methods)

    @property
    def average(self) -> dict[str, float]:
        return dict(zip(self.methods, self.ranks.mean(axis=0).tolist()))


def average_ranks(row) -> np.ndarray:
    """Ascending ranks starting at 1; tied values share their mean rank."""
    row = np.asarray(row, dtype=np.float64)
    order = np.argsort(row, kind="mergesort")
    ranks = np.empty(len(row))
    i = 0
    while i < len(row):
        j = i
        while j + 1 < len(row) and row[order[j + 1]] == row[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def rank_methods(matrix, methods, settings=None) -> RankTable:
    """Rank methods within each setting (row) of ``matrix``; 1 is best."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != len(methods):
        raise ValueError("matrix must be (n_settings, n_methods)")
    if np.any(np.isnan(m)):
        raise ValueError("missing values in rank matrix")
    settings = list(settings) if settings is not None else list(range(m.shape[0]))
    ranks = np.vstack([average_ranks(r) for r in m]) if len(m) else np.zeros((0, len(methods)))
    return RankTable(list(methods), settings, ranks)
