"""Small reverse-mode autodiff engine over float64 numpy arrays.

Only the primitives the GAN losses need are provided: matmul, elementwise
arithmetic, ReLU, sigmoid, softplus, exp, log, logsumexp, hinge-style
maximum, clipping, row gathers, reductions and concatenation.  Graphs are
built dynamically by calling the ops; ``Tensor.backward`` walks the tape.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit


class NonFiniteError(FloatingPointError):
    """A forward value became NaN or infinite."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            _not_scalar(self)
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __neg__(self):
        return neg(self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if self.data.size != 1:
            _not_scalar(self)
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g


def _not_scalar(t):
    raise ValueError(f"expected a scalar tensor, got shape {t.data.shape}")


def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.data.shape, b.data.shape
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.data.shape, b.data.shape
    return _node(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _node(ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    ad, bd = a.data, b.data
    return _node(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _node(a.data.T, (a,), lambda g: (g.T,))


# ---------------------------------------------------------------------------
# nonlinearities


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _node(a.data * mask, (a,), lambda g: (g * mask,))


def maximum(a, c: float) -> Tensor:
    """Elementwise ``max(a, c)`` against a constant (hinge margins)."""
    a = as_tensor(a)
    mask = a.data > c
    return _node(np.where(mask, a.data, c), (a,), lambda g: (g * mask,))


def clip(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    mask = (a.data >= lo) & (a.data <= hi)
    return _node(np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = expit(a.data)
    return _node(s, (a,), lambda g: (g * s * (1.0 - s),))


def softplus(a) -> Tensor:
    a = as_tensor(a)
    return _node(np.logaddexp(0.0, a.data), (a,), lambda g: (g * expit(a.data),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.data)
    return _node(e, (a,), lambda g: (g * e,))


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _node(out, (a,), lambda g: (g / a.data,))


def logsumexp(a, axis=-1, keepdims=False) -> Tensor:
    a = as_tensor(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(a.data - m)
    s = e.sum(axis=axis, keepdims=True)
    out = np.log(s) + m
    soft = e / s

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * soft,)

    return _node(out if keepdims else np.squeeze(out, axis=axis), (a,), backward)


# ---------------------------------------------------------------------------
# indexing, reductions, shape


def gather_rows(m, idx) -> Tensor:
    """Rows ``m[idx]``; used for class-embedding lookups."""
    m = as_tensor(m)
    idx = np.asarray(idx, dtype=np.intp)
    n_rows = m.data.shape[0]

    def backward(g):
        onehot = np.zeros((idx.shape[0], n_rows))
        onehot[np.arange(idx.shape[0]), idx] = 1.0
        return (onehot.T @ g,)

    return _node(m.data[idx], (m,), backward)


def pick(m, idx) -> Tensor:
    """Per-row entry ``m[i, idx[i]]`` of a 2-D tensor."""
    m = as_tensor(m)
    idx = np.asarray(idx, dtype=np.intp)
    rows = np.arange(idx.shape[0])
    shape = m.data.shape

    def backward(g):
        out = np.zeros(shape)
        out[rows, idx] = g
        return (out,)

    return _node(m.data[rows, idx], (m,), backward)


def sum(a, axis=None, keepdims=False) -> Tensor:  # noqa: A001 - mirrors numpy
    a = as_tensor(a)
    shape = a.data.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _node(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.data.shape
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors: Sequence, axis=-1) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    sizes = [t.data.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]
    return _node(np.concatenate([t.data for t in ts], axis=axis), ts,
                 lambda g: tuple(np.split(g, cuts, axis=axis)))


# ---------------------------------------------------------------------------
# graphs, gradient checking, optimisation


class Graph:
    """A named-parameter function wrapped for repeatable forward/backward.

    ``fn(params, *inputs)`` must build and return a tensor from the leaf
    tensors in ``params``.  ``input_shapes``, when given, is checked on every
    forward call.
    """

    def __init__(self, fn: Callable[..., Tensor], params: dict[str, Tensor],
                 input_shapes: Sequence[tuple] | None = None):
        self.fn = fn
        self.params = params
        self.input_shapes = None if input_shapes is None else [tuple(s) for s in input_shapes]
        self.output: Tensor | None = None
        self.nodes: list[Tensor] = []

    def forward(self, *inputs) -> Tensor:
        if self.input_shapes is not None:
            if len(inputs) != len(self.input_shapes):
                raise ValueError(f"expected {len(self.input_shapes)} inputs, got {len(inputs)}")
            for i, (x, s) in enumerate(zip(inputs, self.input_shapes)):
                if np.shape(x) != s:
                    raise ValueError(f"input {i} has shape {np.shape(x)}, expected {s}")
        for p in self.params.values():
            p.grad = None
        out = self.fn(self.params, *inputs)
        self.nodes = _topo_order(out)
        for node in self.nodes:
            if not np.all(np.isfinite(node.data)):
                raise NonFiniteError(f"non-finite value in {node!r}")
        self.output = out
        return out

    def backward(self) -> dict[str, np.ndarray]:
        if self.output is None:
            raise RuntimeError("backward called before forward")
        self.output.backward()
        return {k: (np.zeros_like(p.data) if p.grad is None else p.grad)
                for k, p in self.params.items()}


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    worst: str | None
    n_checked: int
    failures: list[str] = field(default_factory=list)


def rel_error(a, b, floor=1e-6):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def grad_check(graph: Graph, inputs=(), tolerance=1e-4, step=1e-5,
               params: Sequence[str] | None = None) -> GradCheckReport:
    """Compare backward gradients against central finite differences."""
    graph.forward(*inputs)
    analytic = graph.backward()
    names = list(graph.params) if params is None else list(params)
    worst, worst_name, failures, n = 0.0, None, [], 0
    for name in names:
        p = graph.params[name].data
        flat = p.reshape(-1)
        numeric = np.empty_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = graph.fn(graph.params, *inputs).item()
            flat[i] = orig - step
            down = graph.fn(graph.params, *inputs).item()
            flat[i] = orig
            numeric[i] = (up - down) / (2 * step)
        err = rel_error(analytic[name].reshape(-1), numeric)
        n += err.size
        if err.size and err.max() > worst:
            worst, worst_name = float(err.max()), name
        if err.size and err.max() > tolerance:
            failures.append(f"{name}: max rel error {err.max():.3e}")
    return GradCheckReport(not failures, worst, worst_name, n, failures)


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray | None]) -> dict[str, np.ndarray]:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    for k, g in grads.items():
        if g is not None and np.shape(g) != params[k].shape:
            raise ValueError(f"gradient for {k!r} has shape {np.shape(g)}, "
                             f"parameter has {params[k].shape}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for k, p in params.items():
        g = grads.get(k)
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        if g is None:
            g = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params
