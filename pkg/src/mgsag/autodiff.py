"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Tensors wrap a numpy array and remember the operation that produced them.
Calling :func:`backward` on a one-element tensor walks the recorded graph in
reverse topological order and accumulates gradients into every leaf that has
``requires_grad=True``.
"""
from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64
LOG_FLOOR = 1e-12

_grad_enabled = True


class ShapeError(ValueError):
    """Operand shapes do not conform to an operation's rule."""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        joined = " and ".join(str(s) for s in self.shapes)
        super().__init__(f"{op}: incompatible shapes {joined}")


class GraphError(RuntimeError):
    pass


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward", "_leaf", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.op: str | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._leaf = True
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        tag = f", op={self.op}" if self.op else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None):
        return mean(self, axis=axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.op = op
    out._consumed = False
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
        out._leaf = False
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
        out._leaf = True
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def _broadcast_shape(op, a: Tensor, b: Tensor):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


# ---------------------------------------------------------------------------
# elementwise binary ops


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), bw, "mul")


def matmul(a, b) -> Tensor:
    """Matrix product for 1-D/2-D operands, following numpy's rules."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    A, B = a.data, b.data

    def bw(g):
        if A.ndim == 2 and B.ndim == 2:
            return g @ B.T, A.T @ g
        if A.ndim == 2:  # B is a vector, g is (n,)
            return np.outer(g, B), A.T @ g
        if B.ndim == 2:  # A is a vector, g is (m,)
            return B @ g, np.outer(A, g)
        return g * B, g * A

    return _make(np.asarray(A @ B), (a, b), bw, "matmul")


# ---------------------------------------------------------------------------
# shape ops


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *(t.shape for t in tensors)) from None
    ax = axis % data.ndim
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def bw(g):
        return np.split(g, bounds, axis=ax)

    return _make(data, tensors, bw, "concat")


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("stack", *(t.shape for t in tensors)) from None

    def bw(g):
        return [np.take(g, k, axis=axis) for k in range(len(tensors))]

    return _make(data, tensors, bw, "stack")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, shape) from None
    return _make(data, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data.T, (a,), lambda g: (g.T,), "transpose")


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(np.asarray(a.data[idx]), (a,), bw, "getitem")


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(np.asarray(data), (a,), bw, "sum")


def mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis=axis), 1.0 / n)


# ---------------------------------------------------------------------------
# nonlinearities


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),), "tanh")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = _sigmoid(a.data)
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    scale = np.where(a.data > 0, 1.0, slope)
    return _make(a.data * scale, (a,), lambda g: (g * scale,), "leaky_relu")


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: (g * y,), "exp")


def log(a, floor: float = LOG_FLOOR) -> Tensor:
    """Natural log of ``max(a, floor)``; zero gradient where the floor is active."""
    a = as_tensor(a)
    clamped = np.maximum(a.data, floor)
    live = a.data > floor
    return _make(np.log(clamped), (a,), lambda g: (np.where(live, g / clamped, 0.0),), "log")


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    if a.ndim == 0 or not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"softmax(axis={axis})", a.shape)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (a,), bw, "softmax")


def dropout(a, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or ``rate == 0``."""
    a = as_tensor(a)
    if not training or rate <= 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rng is None:
        raise ValueError("dropout in training mode needs a seeded generator")
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "dropout")


def cross_entropy(probs, label) -> Tensor:
    """Negative log-likelihood of ``label`` under a probability row.

    For a 2-D ``probs`` with an integer array ``label`` the mean over rows is
    returned.
    """
    probs = as_tensor(probs)
    labels = np.asarray(label)
    n_classes = probs.shape[-1]
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise ValueError(f"label {label!r} out of range for {n_classes} classes")
    if probs.ndim == 1:
        if labels.ndim != 0:
            raise ShapeError("cross_entropy", probs.shape, labels.shape)
        return mul(log(getitem(probs, int(labels))), -1.0)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ShapeError("cross_entropy", probs.shape, labels.shape)
    picked = getitem(probs, (np.arange(probs.shape[0]), labels))
    return mul(mean(log(picked)), -1.0)


# ---------------------------------------------------------------------------
# backward pass


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(loss: Tensor, params: Iterable[Tensor] | None = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every reachable leaf.

    Leaves listed in ``params`` that the loss does not depend on get a zero
    gradient. The recorded graph is released afterwards, so a second call on
    the same loss raises :class:`GraphError`.
    """
    if loss.size != 1:
        raise GraphError(f"backward needs a one-element loss, got shape {loss.shape}")
    if loss._consumed:
        raise GraphError("backward already ran on this loss; rebuild the graph first")
    loss._consumed = True
    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
    if not loss.requires_grad:
        return
    order = _toposort(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        if node._backward is None:
            raise GraphError(f"graph through '{node.op}' was already consumed by an earlier backward")
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            k = id(parent)
            grads[k] = pg if k not in grads else grads[k] + pg
    for node in order:
        if not node._leaf:
            node._backward = None
            node._parents = ()


# ---------------------------------------------------------------------------
# parameters and optimisation


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


class ParamStore:
    """Named trainable leaves, iterated in lexicographic name order."""

    def __init__(self, seed: int = 0):
        self.rng_seed = seed
        self.rng = np.random.default_rng(seed)
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, value) -> Tensor:
        if name in self._entries:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(value, requires_grad=True)
        self._entries[name] = t
        return t

    def matrix(self, name: str, shape: tuple[int, ...], fan: tuple[int, int] | None = None) -> Tensor:
        fan_in, fan_out = fan if fan is not None else (shape[-1], shape[0])
        bound = glorot_bound(fan_in, fan_out)
        return self.add(name, self.rng.uniform(-bound, bound, size=shape))

    def bias(self, name: str, shape, value: float = 0.0) -> Tensor:
        return self.add(name, np.full(shape, value, dtype=DTYPE))

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return sorted(self._entries)

    def items(self) -> list[tuple[str, Tensor]]:
        return [(n, self._entries[n]) for n in self.names()]

    def values(self) -> list[Tensor]:
        return [self._entries[n] for n in self.names()]

    def n_params(self) -> int:
        return int(sum(t.size for t in self._entries.values()))

    def zero_grad(self) -> None:
        for t in self._entries.values():
            t.grad = np.zeros_like(t.data)

    def clear_grad(self) -> None:
        for t in self._entries.values():
            t.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._entries) ^ set(state)
        if missing:
            raise KeyError(f"parameter names differ: {sorted(missing)}")
        for n, t in self._entries.items():
            arr = np.asarray(state[n], dtype=DTYPE)
            if arr.shape != t.shape:
                raise ShapeError(f"load {n}", t.shape, arr.shape)
            t.data = arr.copy()


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(store: ParamStore, state: AdamState) -> None:
    """One bias-corrected Adam update over every parameter, then zero grads."""
    items = store.items()
    for name, p in items:
        if p.grad is None:
            raise GraphError(f"parameter {name!r} has no gradient")
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for name, p in items:
        g = p.grad
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        p.data = p.data - state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        p.grad = np.zeros_like(p.data)


def finite_difference_check(
    model_fn: Callable[[ParamStore], Tensor],
    store: ParamStore,
    eps: float = 1e-5,
    names: Sequence[str] | None = None,
    precision=np.longdouble,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``model_fn`` must be deterministic (dropout off). Relative error per
    coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``. The analytic side runs
    in float64; the perturbed evaluations run with parameters cast to
    ``precision`` so that rounding in f(p +- eps) stays well below the
    smallest gradients being checked.
    """
    with no_grad():
        f0 = model_fn(store).item()
        f1 = model_fn(store).item()
    if f0 != f1:
        raise GraphError(f"model_fn is not deterministic: {f0!r} != {f1!r}")
    store.clear_grad()
    loss = model_fn(store)
    backward(loss, store.values())
    originals = {n: p.data for n, p in store.items()}
    worst = 0.0
    try:
        for n, p in store.items():
            p.data = originals[n].astype(precision)
        h = precision(eps)
        for name in names if names is not None else store.names():
            p = store[name]
            analytic = p.grad.reshape(-1)
            flat = p.data.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                with no_grad():
                    flat[k] = orig + h
                    fp = model_fn(store).data.reshape(-1)[0]
                    flat[k] = orig - h
                    fm = model_fn(store).data.reshape(-1)[0]
                flat[k] = orig
                num = float((fp - fm) / (2 * h))
                a = float(analytic[k])
                err = abs(a - num) / max(abs(a), abs(num), 1e-8)
                worst = max(worst, err)
    finally:
        for n, p in store.items():
            p.data = originals[n]
    return worst
