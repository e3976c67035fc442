"""Generator and discriminator networks for the 1-D benchmark.

The discriminator carries every head any loss variant needs: the trunk
embedding ``phi``, dual class embeddings ``Vp``/``Vq``, a tied embedding
``V``, the residual head ``psi``, an unconditional head, an amortised gate
head and a scalar gate parameter.  Heads that a variant does not use simply
receive no gradient.
"""
from __future__ import annotations

import json

import numpy as np

from . import diffcore as dc
from .diffcore import Tensor


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class ParamSet:
    """Named leaf tensors sharing storage with the arrays the optimiser updates."""

    def __init__(self, arrays: dict[str, np.ndarray], n_classes: int, trainable=True):
        self.n_classes = n_classes
        self.tensors = {k: Tensor(v, requires_grad=trainable, name=k) for k, v in arrays.items()}
        # Tensor() may copy; keep the canonical arrays bound to the tensors
        self.arrays = {k: t.data for k, t in self.tensors.items()}

    def __getitem__(self, name) -> Tensor:
        return self.tensors[name]

    def frozen(self):
        """Same parameter values, but as constants (no gradient flows into them)."""
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.tensors = {k: Tensor(v, name=k) for k, v in self.arrays.items()}
        return clone

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray | None]:
        return {k: t.grad for k, t in self.tensors.items()}

    def copy(self):
        return type(self).from_arrays({k: v.copy() for k, v in self.arrays.items()},
                                      self.n_classes)

    @classmethod
    def from_arrays(cls, arrays, n_classes):
        return cls(arrays, n_classes)

    def to_json(self) -> str:
        doc = {"n_classes": self.n_classes,
               "params": {k: {"shape": list(v.shape), "values": v.reshape(-1).tolist()}
                          for k, v in sorted(self.arrays.items())}}
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str):
        doc = json.loads(text)
        arrays = {k: np.asarray(e["values"], dtype=np.float64).reshape(e["shape"])
                  for k, e in doc["params"].items()}
        return cls.from_arrays(arrays, doc["n_classes"])


class GeneratorParams(ParamSet):
    @property
    def noise_dim(self) -> int:
        return self.arrays["W1"].shape[0] - self.arrays["embed"].shape[1]


class DiscriminatorParams(ParamSet):
    @property
    def hidden(self) -> int:
        return self.arrays["Vp"].shape[1]


def init_generator(rng, n_classes=3, noise_dim=2, embed_dim=2, hidden=16) -> GeneratorParams:
    d_in = noise_dim + embed_dim
    arrays = {
        "embed": glorot(rng, n_classes, embed_dim),
        "W1": glorot(rng, d_in, hidden), "b1": np.zeros(hidden),
        "W2": glorot(rng, hidden, hidden), "b2": np.zeros(hidden),
        "W3": glorot(rng, hidden, 1), "b3": np.zeros(1),
    }
    return GeneratorParams(arrays, n_classes)


def init_discriminator(rng, n_classes=3, hidden=16, lam_init=0.0) -> DiscriminatorParams:
    arrays = {
        "W1": glorot(rng, 1, hidden), "b1": np.zeros(hidden),
        "W2": glorot(rng, hidden, hidden), "b2": np.zeros(hidden),
        "Vp": glorot(rng, n_classes, hidden),
        "Vq": glorot(rng, n_classes, hidden),
        "V": glorot(rng, n_classes, hidden),
        "psi_w": glorot(rng, hidden, 1), "psi_b": np.zeros(1),
        "uncond_w": glorot(rng, hidden, 1), "uncond_b": np.zeros(1),
        "gate_w": glorot(rng, hidden, 1), "gate_b": np.zeros(1),
        "lam": np.full(1, float(lam_init)),
    }
    return DiscriminatorParams(arrays, n_classes)


def _check_labels(y, n_classes):
    y = np.asarray(y, dtype=np.intp)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"class labels must lie in [0, {n_classes})")
    return y


def _column(x) -> Tensor:
    if isinstance(x, Tensor):
        return dc.reshape(x, (-1, 1))
    return Tensor(np.asarray(x, dtype=np.float64).reshape(-1, 1))


def generate(gen: GeneratorParams, z, y) -> Tensor:
    """Samples ``G(z, y)`` as a length-n tensor; ``z`` has shape (n, noise_dim)."""
    y = _check_labels(y, gen.n_classes)
    z = dc.as_tensor(z)
    if z.data.ndim != 2 or z.data.shape[1] != gen.noise_dim:
        raise ValueError(f"noise must have shape (n, {gen.noise_dim}), got {z.data.shape}")
    h = dc.concat([z, dc.gather_rows(gen["embed"], y)], axis=1)
    h = dc.relu(h @ gen["W1"] + gen["b1"])
    h = dc.relu(h @ gen["W2"] + gen["b2"])
    return dc.reshape(h @ gen["W3"] + gen["b3"], (-1,))


def embed(disc: DiscriminatorParams, x) -> Tensor:
    """Trunk embedding phi(x), shape (n, h)."""
    h = dc.relu(_column(x) @ disc["W1"] + disc["b1"])
    return dc.relu(h @ disc["W2"] + disc["b2"])


def _linear_head(phi, w, b) -> Tensor:
    return dc.reshape(phi @ w + b, (-1,))


def psi(disc, phi) -> Tensor:
    return _linear_head(phi, disc["psi_w"], disc["psi_b"])


def class_dot(table: Tensor, phi: Tensor, y) -> Tensor:
    return dc.sum(dc.gather_rows(table, y) * phi, axis=1)


def dual_proj_logit_phi(disc, phi, y, use_psi=True) -> Tensor:
    diff = dc.gather_rows(disc["Vp"], y) - dc.gather_rows(disc["Vq"], y)
    out = dc.sum(diff * phi, axis=1)
    return out + psi(disc, phi) if use_psi else out


def proj_logit_phi(disc, phi, y, tied_V=None, use_psi=True) -> Tensor:
    out = class_dot(disc["V"] if tied_V is None else dc.as_tensor(tied_V), phi, y)
    return out + psi(disc, phi) if use_psi else out


def dual_proj_logit(disc, x, y) -> Tensor:
    """``(v^p_y - v^q_y)^T phi(x) + psi(phi(x))``."""
    y = _check_labels(y, disc.n_classes)
    return dual_proj_logit_phi(disc, embed(disc, x), y)


def proj_logit(disc, x, y, tied_V=None) -> Tensor:
    """Projection logit with a single (tied) class-embedding matrix.

    ``tied_V`` defaults to the discriminator's own ``V`` block.
    """
    y = _check_labels(y, disc.n_classes)
    return proj_logit_phi(disc, embed(disc, x), y, tied_V)


def uncond_logit_phi(disc, phi) -> Tensor:
    return _linear_head(phi, disc["uncond_w"], disc["uncond_b"])


def uncond_logit(disc, x) -> Tensor:
    return uncond_logit_phi(disc, embed(disc, x))


def log_posterior_phi(disc, head: str, phi) -> Tensor:
    table = {"p": "Vp", "q": "Vq"}[head]
    logits = phi @ dc.transpose(disc[table])
    return logits - dc.logsumexp(logits, axis=1, keepdims=True)


def log_posterior(disc, head: str, x) -> Tensor:
    """(n, K) matrix of class log-probabilities from the ``p`` or ``q`` head."""
    if head not in ("p", "q"):
        raise ValueError(f"head must be 'p' or 'q', got {head!r}")
    return log_posterior_phi(disc, head, embed(disc, x))


def gate_logit_phi(disc, phi) -> Tensor:
    return _linear_head(phi, disc["gate_w"], disc["gate_b"])


def gate(disc, x) -> Tensor:
    """Amortised weight lambda(x) in (0, 1)."""
    return dc.sigmoid(gate_logit_phi(disc, embed(disc, x)))


def sampler(gen: GeneratorParams):
    """Wrap a generator as ``fn(labels, rng) -> values`` for evaluation."""
    def draw(labels, rng):
        z = rng.standard_normal((len(labels), gen.noise_dim))
        return generate(gen.frozen(), z, labels).data.copy()
    return draw
