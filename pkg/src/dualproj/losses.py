"""Discriminator and generator losses for every conditional-GAN variant.

Each loss function returns a :class:`LossReport` whose ``d_total`` depends
only on discriminator parameters (fake samples enter as constants) and whose
``g_total`` depends only on generator parameters (discriminator heads are
frozen, the sample path stays differentiable).  ``parts`` selects which of
the two totals to build, so a training step pays only for the half it needs.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import diffcore as dc
from . import models as M
from .diffcore import Tensor
from .divergences import ActivationKind, FDivergenceKind, f_of_exp
from .mog import LabeledBatch


class LossKind(str, enum.Enum):
    PROJGAN = "projgan"
    DMGAN = "dmgan"
    ACGAN = "acgan"
    TACGAN = "tacgan"
    FCGAN = "fcgan"
    P2GAN = "p2gan"
    P2GAN_D = "p2gan-d"
    P2GAN_S = "p2gan-s"
    P2GAN_SP = "p2gan-sp"
    P2GAN_A = "p2gan-a"
    P2GAN_AP = "p2gan-ap"
    P2GAN_S_ALT = "p2gan-s-alt"
    P2GAN_SP_ALT = "p2gan-sp-alt"
    P2GAN_A_ALT = "p2gan-a-alt"
    P2GAN_AP_ALT = "p2gan-ap-alt"


WEIGHTED = {LossKind.P2GAN_D, LossKind.P2GAN_S, LossKind.P2GAN_SP, LossKind.P2GAN_A,
            LossKind.P2GAN_AP, LossKind.P2GAN_S_ALT, LossKind.P2GAN_SP_ALT,
            LossKind.P2GAN_A_ALT, LossKind.P2GAN_AP_ALT}
ALT = {LossKind.P2GAN_S_ALT, LossKind.P2GAN_SP_ALT, LossKind.P2GAN_A_ALT, LossKind.P2GAN_AP_ALT}
AMORTISED = {LossKind.P2GAN_A, LossKind.P2GAN_AP, LossKind.P2GAN_A_ALT, LossKind.P2GAN_AP_ALT}
PENALISED = {LossKind.P2GAN_SP, LossKind.P2GAN_AP, LossKind.P2GAN_SP_ALT, LossKind.P2GAN_AP_ALT}

VARIANT_NAMES = ("projgan", "dmgan", "acgan", "tacgan", "fcgan:<fdiv>", "p2gan", "p2gan-d:<T>",
                 "p2gan-s", "p2gan-sp", "p2gan-a", "p2gan-ap", "p2gan-s-alt", "p2gan-sp-alt",
                 "p2gan-a-alt", "p2gan-ap-alt")

# scalar gate of the convex-combination family starts at sigmoid(s) = 0.999
MAIN_LAMBDA_INIT = 0.999


class UnknownVariantError(ValueError):
    pass


@dataclass(frozen=True)
class LossVariant:
    kind: LossKind
    activation: ActivationKind = ActivationKind.SOFTPLUS_BCE
    fdiv: FDivergenceKind | None = None
    decay_T: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        object.__setattr__(self, "activation", ActivationKind(self.activation))
        if self.fdiv is not None:
            object.__setattr__(self, "fdiv", FDivergenceKind(self.fdiv))
        if (self.fdiv is not None) != (self.kind is LossKind.FCGAN):
            raise ValueError("fdiv must be set exactly when kind is fcgan")
        if (self.decay_T is not None) != (self.kind is LossKind.P2GAN_D):
            raise ValueError("decay_T must be set exactly when kind is p2gan-d")
        if self.decay_T is not None and not self.decay_T > 0:
            raise ValueError("decay_T must be positive")

    @classmethod
    def parse(cls, name: str, activation="bce") -> "LossVariant":
        base, _, arg = name.strip().lower().partition(":")
        try:
            kind = LossKind(base)
            act = ActivationKind(activation)
        except ValueError:
            raise UnknownVariantError(
                f"unknown variant {name!r}/{activation!r}; valid variants: "
                f"{', '.join(VARIANT_NAMES)}; activations: bce, hinge") from None
        try:
            if kind is LossKind.FCGAN:
                return cls(kind, act, fdiv=FDivergenceKind(arg or "reverse-kl"))
            if kind is LossKind.P2GAN_D:
                return cls(kind, act, decay_T=float(arg))
            if arg:
                raise ValueError(f"variant {base!r} takes no argument")
        except ValueError as exc:
            raise UnknownVariantError(
                f"bad variant {name!r}: {exc}; valid variants: {', '.join(VARIANT_NAMES)}; "
                f"f-divergences: {', '.join(k.value for k in FDivergenceKind)}") from None
        return cls(kind, act)

    @property
    def name(self) -> str:
        if self.kind is LossKind.FCGAN:
            return f"fcgan:{self.fdiv.value}"
        if self.kind is LossKind.P2GAN_D:
            return f"p2gan-d:{self.decay_T:g}"
        return self.kind.value

    def lambda_init(self) -> float:
        """Initial raw value of the scalar gate parameter."""
        if self.kind in (LossKind.P2GAN_S, LossKind.P2GAN_SP):
            return float(np.log(MAIN_LAMBDA_INIT / (1 - MAIN_LAMBDA_INIT)))
        return 0.0  # ALT family: lambda = exp(0) = 1


@dataclass
class Models:
    gen: M.GeneratorParams
    disc: M.DiscriminatorParams


@dataclass
class Batch:
    real: LabeledBatch
    noise: np.ndarray
    fake_labels: np.ndarray
    step: int = 0

    def __post_init__(self):
        if not len(self.real) == len(self.noise) == len(self.fake_labels):
            raise ValueError("real, noise and fake_labels must have equal batch sizes")


@dataclass
class LossReport:
    d_total: Tensor | None
    g_total: Tensor | None
    components: dict[str, Tensor]
    diagnostics: dict[str, float] = field(default_factory=dict)

    def values(self) -> dict[str, float]:
        out = {k: v.item() for k, v in self.components.items()}
        if self.d_total is not None:
            out["d_total"] = self.d_total.item()
        if self.g_total is not None:
            out["g_total"] = self.g_total.item()
        return out


def _report(components: dict[str, Tensor], diagnostics=None) -> LossReport:
    def total(prefix):
        terms = [v for k, v in components.items() if k.startswith(prefix)]
        if not terms:
            return None
        out = terms[0]
        for t in terms[1:]:
            out = out + t
        return out
    return LossReport(total("d_"), total("g_"), components, diagnostics or {})


# ---------------------------------------------------------------------------
# building blocks


def activation_apply(kind, t, side: str) -> Tensor:
    """Discriminator loss term for logit ``t``; ``side`` is ``"real"`` or ``"fake"``."""
    kind = ActivationKind(kind)
    if side == "real":
        t = dc.neg(t)
    elif side != "fake":
        raise ValueError(f"side must be 'real' or 'fake', got {side!r}")
    if kind is ActivationKind.SOFTPLUS_BCE:
        return dc.softplus(t)
    return dc.maximum(1.0 + t, 0.0)


def generator_term(kind, t) -> Tensor:
    """Per-sample generator loss; hinge uses the linear form ``-t``."""
    if ActivationKind(kind) is ActivationKind.SOFTPLUS_BCE:
        return dc.softplus(dc.neg(t))
    return dc.neg(t)


def neg_log_posterior_phi(disc, head, phi, y) -> Tensor:
    """Per-sample ``-T^head(x, y)``."""
    return dc.neg(dc.pick(M.log_posterior_phi(disc, head, phi), y))


def ce_loss(disc, head: str, x, y) -> Tensor:
    """Mean cross-entropy of the ``p`` or ``q`` classifier on ``(x, y)``."""
    if len(np.atleast_1d(y)) == 0:
        raise ValueError("empty batch")
    phi = M.embed(disc, x)
    return dc.mean(neg_log_posterior_phi(disc, head, phi, np.asarray(y, dtype=np.intp)))


class _Views:
    """Lazily built embeddings shared by the loss constructions."""

    def __init__(self, models: Models, batch: Batch):
        self.disc = models.disc
        self.frozen = models.disc.frozen()
        self.yr = np.asarray(batch.real.ys, dtype=np.intp)
        self.yf = np.asarray(batch.fake_labels, dtype=np.intp)
        self.xr = batch.real.xs
        self._gen, self._noise = models.gen, batch.noise
        self._cache = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def fake(self) -> Tensor:
        return self._get("fake", lambda: M.generate(self._gen, self._noise, self.yf))

    @property
    def fake_const(self) -> np.ndarray:
        return self._get("fake_const", lambda: self.fake.data.copy())

    @property
    def phi_real(self):
        return self._get("phi_real", lambda: M.embed(self.disc, self.xr))

    @property
    def phi_fake(self):
        """Discriminator-side embedding of fakes (generator path cut)."""
        return self._get("phi_fake", lambda: M.embed(self.disc, self.fake_const))

    @property
    def phi_gen(self):
        """Generator-side embedding of fakes (discriminator frozen)."""
        return self._get("phi_gen", lambda: M.embed(self.frozen, self.fake))


def _adversarial_d(act, logit_real, logit_fake, comps, w_real=None, w_fake=None):
    a_r = activation_apply(act, logit_real, "real")
    a_f = activation_apply(act, logit_fake, "fake")
    comps["d_adv_real"] = dc.mean(a_r if w_real is None else w_real * a_r)
    comps["d_adv_fake"] = dc.mean(a_f if w_fake is None else w_fake * a_f)


def _parts(parts):
    parts = tuple(parts)
    if not parts or any(p not in ("d", "g") for p in parts):
        raise ValueError("parts must be drawn from ('d', 'g')")
    return parts


# ---------------------------------------------------------------------------
# projection family


def loss_projgan(models: Models, batch: Batch, activation, parts=("d", "g"),
                 tied_V=None, use_psi=True) -> LossReport:
    """Projection discriminator with a single class-embedding matrix."""
    parts, v = _parts(parts), _Views(models, batch)
    comps = {}
    if "d" in parts:
        _adversarial_d(activation,
                       M.proj_logit_phi(v.disc, v.phi_real, v.yr, tied_V, use_psi),
                       M.proj_logit_phi(v.disc, v.phi_fake, v.yf, tied_V, use_psi), comps)
    if "g" in parts:
        t = M.proj_logit_phi(v.frozen, v.phi_gen, v.yf, tied_V, use_psi)
        comps["g_adv"] = dc.mean(generator_term(activation, t))
    return _report(comps)


def loss_dmgan(models: Models, batch: Batch, activation, parts=("d", "g")) -> LossReport:
    """Projection discriminator with the residual head forced to zero."""
    return loss_projgan(models, batch, activation, parts, use_psi=False)


def _p2gan_core(v: _Views, activation, parts, comps):
    if "d" in parts:
        _adversarial_d(activation,
                       M.dual_proj_logit_phi(v.disc, v.phi_real, v.yr),
                       M.dual_proj_logit_phi(v.disc, v.phi_fake, v.yf), comps)
        comps["d_ce_p_real"] = dc.mean(neg_log_posterior_phi(v.disc, "p", v.phi_real, v.yr))
        comps["d_ce_q_fake"] = dc.mean(neg_log_posterior_phi(v.disc, "q", v.phi_fake, v.yf))
    if "g" in parts:
        t = M.dual_proj_logit_phi(v.frozen, v.phi_gen, v.yf)
        comps["g_adv"] = dc.mean(generator_term(activation, t))


def loss_p2gan(models: Models, batch: Batch, activation, parts=("d", "g")) -> LossReport:
    """Dual projection: untied ``Vp``/``Vq`` trained by their own cross-entropies."""
    parts, v = _parts(parts), _Views(models, batch)
    comps = {}
    _p2gan_core(v, activation, parts, comps)
    return _report(comps)


def loss_p2gan_weighted(models: Models, batch: Batch, variant: LossVariant,
                        parts=("d", "g"), lam_override: float | None = None) -> LossReport:
    """Gated dual projection (decay, scalar and amortised gates, +/- penalty).

    The main family mixes ``(1 - lam)`` adversarial and ``lam`` cross-entropy
    terms; the ``-alt`` family and ``p2gan-d`` keep the adversarial weight at 1.
    ``lam_override`` pins the gate to a constant (used for reductions).
    """
    kind = variant.kind
    if kind not in WEIGHTED:
        raise UnknownVariantError(f"{variant.name!r} is not a weighted variant")
    parts, v = _parts(parts), _Views(models, batch)
    act = variant.activation
    convex = kind not in ALT and kind is not LossKind.P2GAN_D
    comps, diag = {}, {}

    def gate_values(disc, phi):
        """Per-sample (or scalar) lambda and, for the penalty, -log lambda."""
        if lam_override is not None:
            lam = Tensor(float(lam_override))
            return lam, None
        if kind is LossKind.P2GAN_D:
            return Tensor(float(np.exp(-batch.step / variant.decay_T))), None
        if kind in AMORTISED:
            raw = M.gate_logit_phi(disc, phi)
        else:
            raw = dc.reshape(disc["lam"], ())
        if convex:
            return dc.sigmoid(raw), dc.softplus(dc.neg(raw))
        raw = dc.clip(raw, -30.0, 30.0)
        return dc.exp(raw), dc.neg(raw)

    if "d" in parts:
        lam_r, nlog_r = gate_values(v.disc, v.phi_real)
        lam_f, nlog_f = gate_values(v.disc, v.phi_fake)
        logit_r = M.dual_proj_logit_phi(v.disc, v.phi_real, v.yr)
        logit_f = M.dual_proj_logit_phi(v.disc, v.phi_fake, v.yf)
        if convex:
            _adversarial_d(act, logit_r, logit_f, comps, 1.0 - lam_r, 1.0 - lam_f)
        else:
            _adversarial_d(act, logit_r, logit_f, comps)
        ce_p = neg_log_posterior_phi(v.disc, "p", v.phi_real, v.yr)
        ce_q = neg_log_posterior_phi(v.disc, "q", v.phi_fake, v.yf)
        comps["d_ce_p_real"] = dc.mean(lam_r * ce_p)
        comps["d_ce_q_fake"] = dc.mean(lam_f * ce_q)
        if kind in PENALISED and nlog_r is not None:
            if kind in AMORTISED:
                comps["d_penalty"] = 0.5 * dc.mean(dc.concat([nlog_r, nlog_f], axis=0))
            else:
                comps["d_penalty"] = 0.5 * nlog_r
        diag["lambda_mean"] = float(np.mean(np.concatenate(
            [np.ravel(lam_r.data), np.ravel(lam_f.data)])))
        diag["ce_p_real"] = float(ce_p.data.mean())
        diag["ce_q_fake"] = float(ce_q.data.mean())
    if "g" in parts:
        t = M.dual_proj_logit_phi(v.frozen, v.phi_gen, v.yf)
        g = generator_term(act, t)
        if convex:
            lam_g, _ = gate_values(v.frozen, v.phi_gen)
            g = (1.0 - lam_g) * g
            diag.setdefault("lambda_mean", float(np.mean(lam_g.data)))
        comps["g_adv"] = dc.mean(g)
    return _report(comps, diag)


# ---------------------------------------------------------------------------
# marginal + classifier family


def _uncond_adversarial(v: _Views, activation, parts, comps):
    if "d" in parts:
        _adversarial_d(activation, M.uncond_logit_phi(v.disc, v.phi_real),
                       M.uncond_logit_phi(v.disc, v.phi_fake), comps)
    if "g" in parts:
        comps["g_adv"] = dc.mean(generator_term(activation,
                                                M.uncond_logit_phi(v.frozen, v.phi_gen)))


def loss_fcgan(models: Models, batch: Batch, activation, fdiv, parts=("d", "g")) -> LossReport:
    """Unconditional adversarial loss plus an f-divergence between class posteriors."""
    parts, v = _parts(parts), _Views(models, batch)
    comps = {}
    _uncond_adversarial(v, activation, parts, comps)
    if "d" in parts:
        comps["d_ce_p_real"] = dc.mean(neg_log_posterior_phi(v.disc, "p", v.phi_real, v.yr))
        comps["d_ce_q_fake"] = dc.mean(neg_log_posterior_phi(v.disc, "q", v.phi_fake, v.yf))
    if "g" in parts:
        tp = dc.pick(M.log_posterior_phi(v.frozen, "p", v.phi_gen), v.yf)
        tq = dc.pick(M.log_posterior_phi(v.frozen, "q", v.phi_gen), v.yf)
        comps["g_f_term"] = dc.mean(f_of_exp(fdiv, tp - tq))
    return _report(comps)


def loss_acgan(models: Models, batch: Batch, activation, parts=("d", "g")) -> LossReport:
    parts, v = _parts(parts), _Views(models, batch)
    comps = {}
    _uncond_adversarial(v, activation, parts, comps)
    if "d" in parts:
        comps["d_ce_p_real"] = dc.mean(neg_log_posterior_phi(v.disc, "p", v.phi_real, v.yr))
        comps["d_ce_p_fake"] = dc.mean(neg_log_posterior_phi(v.disc, "p", v.phi_fake, v.yf))
    if "g" in parts:
        comps["g_ce_p_fake"] = dc.mean(neg_log_posterior_phi(v.frozen, "p", v.phi_gen, v.yf))
    return _report(comps)


def loss_tacgan(models: Models, batch: Batch, activation, parts=("d", "g")) -> LossReport:
    """Twin auxiliary classifiers, including the ``p``-classifier term on fakes."""
    parts, v = _parts(parts), _Views(models, batch)
    comps = {}
    _uncond_adversarial(v, activation, parts, comps)
    if "d" in parts:
        comps["d_ce_p_real"] = dc.mean(neg_log_posterior_phi(v.disc, "p", v.phi_real, v.yr))
        comps["d_ce_q_fake"] = dc.mean(neg_log_posterior_phi(v.disc, "q", v.phi_fake, v.yf))
        comps["d_ce_p_fake"] = dc.mean(neg_log_posterior_phi(v.disc, "p", v.phi_fake, v.yf))
    if "g" in parts:
        comps["g_ce_p_fake"] = dc.mean(neg_log_posterior_phi(v.frozen, "p", v.phi_gen, v.yf))
        comps["g_ce_q_fake_neg"] = dc.neg(
            dc.mean(neg_log_posterior_phi(v.frozen, "q", v.phi_gen, v.yf)))
    return _report(comps)


def compute_losses(variant: LossVariant, models: Models, batch: Batch,
                   parts=("d", "g")) -> LossReport:
    kind, act = variant.kind, variant.activation
    if kind is LossKind.PROJGAN:
        return loss_projgan(models, batch, act, parts)
    if kind is LossKind.DMGAN:
        return loss_dmgan(models, batch, act, parts)
    if kind is LossKind.ACGAN:
        return loss_acgan(models, batch, act, parts)
    if kind is LossKind.TACGAN:
        return loss_tacgan(models, batch, act, parts)
    if kind is LossKind.FCGAN:
        return loss_fcgan(models, batch, act, variant.fdiv, parts)
    if kind is LossKind.P2GAN:
        return loss_p2gan(models, batch, act, parts)
    return loss_p2gan_weighted(models, batch, variant, parts)
