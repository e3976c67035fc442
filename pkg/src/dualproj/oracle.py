"""Exact checks of the label/data-matching identities on finite distributions.

Everything here works on explicit probability tables, so identities can be
verified to floating-point precision with no sampling error.  Joint tables
are indexed ``[x, y]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .divergences import jsd_categorical, kl_categorical, tv_categorical

TOL = 1e-12


class SupportError(ValueError):
    """A KL term would be infinite (absolute continuity violated)."""


@dataclass(frozen=True)
class DiscreteJoint:
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=np.float64)
        if t.ndim != 2:
            raise ValueError("joint table must be 2-D (|X| x |Y|)")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise ValueError("joint table entries must be finite and non-negative")
        if t.sum() == 0:
            raise ValueError("joint table is all zeros")
        if abs(t.sum() - 1.0) > TOL:
            raise ValueError(f"joint table sums to {t.sum()!r}, not 1")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def shape(self):
        return self.table.shape

    @property
    def marginal_x(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def marginal_y(self) -> np.ndarray:
        return self.table.sum(axis=0)

    @classmethod
    def from_parts(cls, marginal_x, posterior) -> "DiscreteJoint":
        post = np.asarray(posterior.rows if isinstance(posterior, ConditionalTable) else posterior)
        return cls(np.asarray(marginal_x, dtype=np.float64)[:, None] * post)


@dataclass(frozen=True)
class ConditionalTable:
    """Rows ``rows[x]`` are categorical distributions over Y; NaN rows are undefined."""

    rows: np.ndarray
    undefined: tuple[int, ...] = ()

    def __post_init__(self):
        r = np.array(self.rows, dtype=np.float64)
        if r.ndim != 2:
            raise ValueError("conditional table must be 2-D (|X| x |Y|)")
        for x in range(r.shape[0]):
            if x in self.undefined:
                continue
            if np.any(r[x] < 0) or abs(r[x].sum() - 1.0) > TOL:
                raise ValueError(f"row {x} is not a categorical distribution")
        r.setflags(write=False)
        object.__setattr__(self, "rows", r)

    def row(self, x) -> np.ndarray:
        if x in self.undefined:
            raise SupportError(f"conditional row {x} is undefined (zero marginal)")
        return self.rows[x]


def posterior_from_joint(joint: DiscreteJoint) -> tuple[np.ndarray, ConditionalTable]:
    """Marginal over X and the Bayes posterior ``P(y | x)``.

    Rows with zero marginal mass are NaN and listed in ``undefined``.
    """
    t = joint.table
    px = t.sum(axis=1)
    undefined = tuple(int(i) for i in np.flatnonzero(px == 0))
    rows = np.full_like(t, np.nan)
    ok = px > 0
    rows[ok] = t[ok] / px[ok, None]
    return px, ConditionalTable(rows, undefined)


def _as_joint(j) -> DiscreteJoint:
    return j if isinstance(j, DiscreteJoint) else DiscreteJoint(j)


def _as_conditional(c) -> ConditionalTable:
    return c if isinstance(c, ConditionalTable) else ConditionalTable(c)


@dataclass(frozen=True)
class IdentityReport:
    lhs: float
    rhs: float

    @property
    def difference(self) -> float:
        return abs(self.lhs - self.rhs)

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.difference))


def lemma1_gap(joint, classifier) -> float:
    """``E log P(y|x) - E log C(y|x)`` under the joint; never negative.

    The Bayes posterior maximises the expected log-likelihood of any
    classifier, and the gap equals the marginal-averaged KL between them.
    """
    joint, classifier = _as_joint(joint), _as_conditional(classifier)
    px, post = posterior_from_joint(joint)
    t = joint.table
    mask = t > 0
    if np.any(classifier.rows[mask] <= 0):
        raise SupportError("classifier assigns zero probability to an observed pair")
    return float(np.sum(t[mask] * (np.log(post.rows[mask]) - np.log(classifier.rows[mask]))))


def prop1_identity(P, Q, D) -> IdentityReport:
    """Joint value function versus its per-class rearrangement.

    lhs = E_P log D + E_Q log(1 - D);
    rhs = sum_y P_Y(y) [E_{P(x|y)} log D + Q_Y(y) / P_Y(y) E_{Q(x|y)} log(1 - D)].
    """
    P, Q = _as_joint(P), _as_joint(Q)
    D = np.asarray(D, dtype=np.float64)
    if P.shape != Q.shape or D.shape != P.shape:
        raise ValueError("P, Q and D must share the same |X| x |Y| shape")
    if np.any(D <= 0) or np.any(D >= 1):
        raise ValueError("discriminator values must lie strictly inside (0, 1)")
    py, qy = P.marginal_y, Q.marginal_y
    if np.any(py == 0):
        raise ValueError("every class needs positive prior under P")
    logd, log1md = np.log(D), np.log1p(-D)
    lhs = float(np.sum(P.table * logd) + np.sum(Q.table * log1md))
    rhs = 0.0
    for y in range(P.shape[1]):
        real = np.sum(P.table[:, y] / py[y] * logd[:, y])
        fake = 0.0 if qy[y] == 0 else np.sum(Q.table[:, y] / qy[y] * log1md[:, y])
        rhs += py[y] * (real + qy[y] / py[y] * fake)
    return IdentityReport(lhs, float(rhs))


def prop2_identity(P_posterior, Q_posterior, Q_marginal) -> IdentityReport:
    """Classification-loss gap on generated data versus the averaged reverse KL.

    lhs = L^p - L^q where both are cross-entropies on pairs drawn from
    ``Q_X * Q_{Y|X}`` scored by the optimal (Bayes) classifiers;
    rhs = sum_x Q_X(x) KL(Q_{Y|X=x} || P_{Y|X=x}).
    """
    Pp, Qp = _as_conditional(P_posterior), _as_conditional(Q_posterior)
    qx = np.asarray(Q_marginal, dtype=np.float64)
    if Pp.rows.shape != Qp.rows.shape or qx.shape != (Pp.rows.shape[0],):
        raise ValueError("posterior tables and marginal have inconsistent shapes")
    joint = qx[:, None] * np.nan_to_num(Qp.rows)
    mask = joint > 0
    p_rows = Pp.rows
    if np.any(~(p_rows[mask] > 0)):
        raise SupportError("Q posterior is not absolutely continuous w.r.t. P posterior")
    loss_p = -np.sum(joint[mask] * np.log(p_rows[mask]))
    loss_q = -np.sum(joint[mask] * np.log(Qp.rows[mask]))
    rhs = sum(qx[x] * kl_categorical(Qp.row(x), Pp.row(x))
              for x in range(len(qx)) if qx[x] > 0)
    return IdentityReport(float(loss_p - loss_q), float(rhs))


@dataclass
class BoundReport:
    lhs: float
    rhs: float
    terms: dict[str, float]
    chain: dict[str, float] = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.margin))


def _expected_kl(weights, a: ConditionalTable, b: ConditionalTable) -> float:
    return float(sum(w * kl_categorical(a.row(x), b.row(x))
                     for x, w in enumerate(weights) if w > 0))


def _expected_tv(weights, a: ConditionalTable, b: ConditionalTable) -> float:
    return float(sum(w * tv_categorical(a.row(x), b.row(x))
                     for x, w in enumerate(weights) if w > 0))


def theorem1_bound(P, Q, Qp, Qq, P_posterior=None, Q_posterior=None) -> BoundReport:
    """Joint JSD against the sum of marginal and posterior-mismatch terms.

    ``Qp`` and ``Qq`` are the real-side and fake-side classifier tables.
    The three conditional KL terms are averaged over ``Q_X``; constants use
    counting measure (c1 = |X| / 2, c2 = 1).  Posteriors of zero-marginal
    x may be supplied explicitly through ``P_posterior``/``Q_posterior``;
    otherwise they are derived from the joints.  ``chain`` records the
    intermediate quantities of the argument, each of which is bounded by
    the next.
    """
    P, Q = _as_joint(P), _as_joint(Q)
    Qp, Qq = _as_conditional(Qp), _as_conditional(Qq)
    if P.shape != Q.shape or Qp.rows.shape != P.shape or Qq.rows.shape != P.shape:
        raise ValueError("all tables must share the same |X| x |Y| shape")
    px, p_post = posterior_from_joint(P)
    qx, q_post = posterior_from_joint(Q)
    if P_posterior is not None:
        p_post = _as_conditional(P_posterior)
    if Q_posterior is not None:
        q_post = _as_conditional(Q_posterior)
    try:
        kl_p = _expected_kl(qx, p_post, Qp)
        kl_q = _expected_kl(qx, q_post, Qq)
        kl_qq = _expected_kl(qx, Qq, Qp)
    except ValueError as exc:
        raise SupportError(str(exc)) from None
    n_x = P.shape[0]
    c1, c2 = n_x / 2.0, 1.0
    jsd_x = jsd_categorical(px, qx)
    terms = {
        "marginal": 2.0 * c1 * math.sqrt(2.0 * max(jsd_x, 0.0)),
        "real_posterior": c2 * math.sqrt(2.0 * max(kl_p, 0.0)),
        "fake_posterior": c2 * math.sqrt(2.0 * max(kl_q, 0.0)),
        "classifier_gap": c2 * math.sqrt(2.0 * max(kl_qq, 0.0)),
    }
    lhs = jsd_categorical(P.table.ravel(), Q.table.ravel())
    delta_joint = tv_categorical(P.table.ravel(), Q.table.ravel())
    delta_x = tv_categorical(px, qx)
    cond_tv = _expected_tv(qx, p_post, q_post)
    chain = {
        "jsd": lhs,
        "two_tv_joint": 2.0 * delta_joint,
        "two_tv_split": 2.0 * (delta_x + cond_tv),
        "two_tv_triangle": 2.0 * (delta_x + _expected_tv(qx, p_post, Qp)
                                  + _expected_tv(qx, Qp, Qq) + _expected_tv(qx, Qq, q_post)),
        "bound": sum(terms.values()),
    }
    return BoundReport(lhs, chain["bound"], terms, chain)


@dataclass(frozen=True)
class SandwichReport:
    tv: float
    kl: float
    jsd: float

    @property
    def pinsker_ok(self) -> bool:
        return self.tv <= math.sqrt(self.kl / 2.0) + TOL

    @property
    def lower_ok(self) -> bool:
        return 0.5 * self.tv**2 <= self.jsd + TOL

    @property
    def upper_ok(self) -> bool:
        return self.jsd <= 2.0 * self.tv + TOL

    @property
    def passed(self) -> bool:
        return self.pinsker_ok and self.lower_ok and self.upper_ok


def pinsker_sandwich(p, q) -> SandwichReport:
    """Total variation versus KL(p||q) and JSD(p, q)."""
    try:
        kl = kl_categorical(p, q)
    except ValueError as exc:
        raise SupportError(str(exc)) from None
    return SandwichReport(tv_categorical(p, q), kl, jsd_categorical(p, q))


# ---------------------------------------------------------------------------
# random instances


def _normalise(a):
    a = np.asarray(a, dtype=np.float64)
    return a / a.sum()


def random_categorical(rng, n, alpha=1.0) -> np.ndarray:
    return _normalise(rng.dirichlet(np.full(n, alpha)))


def random_joint(rng, nx, ny, alpha=1.0) -> DiscreteJoint:
    return DiscreteJoint(_normalise(rng.dirichlet(np.full(nx * ny, alpha)).reshape(nx, ny)))


def random_conditional(rng, nx, ny, alpha=1.0) -> ConditionalTable:
    rows = rng.dirichlet(np.full(ny, alpha), size=nx)
    return ConditionalTable(rows / rows.sum(axis=1, keepdims=True))


def random_theorem_instance(rng, max_size=5):
    """(P, Q, Qp, Qq) with |X|, |Y| drawn from 1..max_size."""
    nx, ny = rng.integers(1, max_size + 1, size=2)
    alpha = rng.choice([0.3, 1.0, 3.0])
    return (random_joint(rng, nx, ny, alpha), random_joint(rng, nx, ny, alpha),
            random_conditional(rng, nx, ny, alpha), random_conditional(rng, nx, ny, alpha))
