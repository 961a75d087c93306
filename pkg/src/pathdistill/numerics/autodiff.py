"""Tensor type with taped reverse-mode gradients over numpy arrays.

The graph is built eagerly: every op whose inputs require gradients records
a closure that maps the output adjoint to input adjoints. ``backward`` on a
scalar walks the tape once in reverse topological order; calling it twice on
the same node is an error because adjoint buffers have been consumed.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence, Union

import numpy as np

ArrayLike = Union[np.ndarray, float, int, "Tensor"]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float32)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents: tuple = ()
        self._consumed = False

    # -- basics ------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- operators ----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def backward(self):
        backward(self)


def as_tensor(x: ArrayLike) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x))


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


# ---------------------------------------------------------------------------
# Arithmetic
# ---------------------------------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    # Python-number operands stay scalars so they cannot promote the dtype.
    if isinstance(b, (int, float)):
        ta = as_tensor(a)
        data = ta.data + b

        def bwd_s(g):
            if ta.requires_grad:
                _accumulate(ta, g)

        return _make(data, (ta,), bwd_s)
    if isinstance(a, (int, float)):
        return add(b, a)

    ta, tb = as_tensor(a), as_tensor(b)
    data = ta.data + tb.data

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, _unbroadcast(g, ta.data.shape))
        if tb.requires_grad:
            _accumulate(tb, _unbroadcast(g, tb.data.shape))

    return _make(data, (ta, tb), bwd)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    if isinstance(b, (int, float)):
        ta = as_tensor(a)
        data = ta.data * b

        def bwd_s(g):
            if ta.requires_grad:
                _accumulate(ta, g * b)

        return _make(data, (ta,), bwd_s)
    if isinstance(a, (int, float)):
        return mul(b, a)

    ta, tb = as_tensor(a), as_tensor(b)
    data = ta.data * tb.data

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, _unbroadcast(g * tb.data, ta.data.shape))
        if tb.requires_grad:
            _accumulate(tb, _unbroadcast(g * ta.data, tb.data.shape))

    return _make(data, (ta, tb), bwd)


def power(a: ArrayLike, exponent: float) -> Tensor:
    ta = as_tensor(a)
    data = ta.data ** exponent

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g * exponent * ta.data ** (exponent - 1.0))

    return _make(data, (ta,), bwd)


def square(a: ArrayLike) -> Tensor:
    ta = as_tensor(a)
    data = ta.data * ta.data

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g * 2.0 * ta.data)

    return _make(data, (ta,), bwd)


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    if ta.data.ndim not in (1, 2) or tb.data.ndim not in (1, 2):
        raise ValueError(f"matmul supports 1-D/2-D operands, got {ta.data.ndim}-D @ {tb.data.ndim}-D")
    try:
        data = ta.data @ tb.data
    except ValueError as exc:
        raise ValueError(f"matmul shape mismatch: {ta.data.shape} @ {tb.data.shape}") from exc

    a2 = ta.data if ta.data.ndim == 2 else ta.data[None, :]
    b2 = tb.data if tb.data.ndim == 2 else tb.data[:, None]

    def bwd(g):
        g2 = g
        if ta.data.ndim == 1:
            g2 = g2[None, :] if g2.ndim == 1 else g2
        if tb.data.ndim == 1:
            g2 = g2[:, None] if g2.ndim == 1 else g2
        if g2.ndim == 0:  # both operands 1-D
            g2 = g2.reshape(1, 1)
        if ta.requires_grad:
            ga = g2 @ b2.T
            _accumulate(ta, ga[0] if ta.data.ndim == 1 else ga)
        if tb.requires_grad:
            gb = a2.T @ g2
            _accumulate(tb, gb[:, 0] if tb.data.ndim == 1 else gb)

    return _make(data, (ta, tb), bwd)


def affine(x: ArrayLike, w: ArrayLike, b: ArrayLike) -> Tensor:
    """Fused ``x @ w + b`` for 1-D or 2-D ``x`` (rows are samples)."""
    tx, tw, tb = as_tensor(x), as_tensor(w), as_tensor(b)
    try:
        data = tx.data @ tw.data + tb.data
    except ValueError as exc:
        raise ValueError(f"affine shape mismatch: {tx.data.shape} @ {tw.data.shape} + {tb.data.shape}") from exc

    def bwd(g):
        g2 = g if g.ndim == 2 else g[None, :]
        x2 = tx.data if tx.data.ndim == 2 else tx.data[None, :]
        if tx.requires_grad:
            gx = g2 @ tw.data.T
            _accumulate(tx, gx[0] if tx.data.ndim == 1 else gx)
        if tw.requires_grad:
            _accumulate(tw, x2.T @ g2)
        if tb.requires_grad:
            _accumulate(tb, _unbroadcast(g, tb.data.shape))

    return _make(data, (tx, tw, tb), bwd)


def transpose(a: ArrayLike) -> Tensor:
    ta = as_tensor(a)

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g.T)

    return _make(ta.data.T, (ta,), bwd)


def reshape(a: ArrayLike, shape) -> Tensor:
    ta = as_tensor(a)

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g.reshape(ta.data.shape))

    return _make(ta.data.reshape(shape), (ta,), bwd)


def concat(parts: Iterable[ArrayLike], axis: int = 0) -> Tensor:
    ts = [as_tensor(p) for p in parts]
    data = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                _accumulate(t, g[tuple(sl)])

    return _make(data, ts, bwd)


def take(a: ArrayLike, idx) -> Tensor:
    """Indexing/slicing; duplicate indices accumulate in the backward pass."""
    ta = as_tensor(a)
    data = ta.data[idx]

    def bwd(g):
        if ta.requires_grad:
            buf = np.zeros_like(ta.data)
            np.add.at(buf, idx, g)
            _accumulate(ta, buf)

    return _make(data, (ta,), bwd)


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------

def sum_(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    ta = as_tensor(a)
    data = ta.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if not ta.requires_grad:
            return
        if axis is None:
            _accumulate(ta, np.broadcast_to(g, ta.data.shape).copy())
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            _accumulate(ta, np.broadcast_to(ge, ta.data.shape).copy())

    return _make(data, (ta,), bwd)


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    ta = as_tensor(a)
    n = ta.data.size if axis is None else ta.data.shape[axis]
    return mul(sum_(ta, axis=axis, keepdims=keepdims), 1.0 / float(n))


# ---------------------------------------------------------------------------
# Elementwise nonlinearities
# ---------------------------------------------------------------------------

def relu(a: ArrayLike) -> Tensor:
    ta = as_tensor(a)
    data = np.maximum(ta.data, 0.0)

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g * (ta.data > 0))

    return _make(data, (ta,), bwd)


def tanh(a: ArrayLike) -> Tensor:
    ta = as_tensor(a)
    data = np.tanh(ta.data)

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g * (1.0 - data * data))

    return _make(data, (ta,), bwd)


def sigmoid(a: ArrayLike) -> Tensor:
    ta = as_tensor(a)
    data = 1.0 / (1.0 + np.exp(-np.clip(ta.data, -60.0, 60.0)))

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g * data * (1.0 - data))

    return _make(data, (ta,), bwd)


def exp(a: ArrayLike) -> Tensor:
    ta = as_tensor(a)
    data = np.exp(ta.data)

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g * data)

    return _make(data, (ta,), bwd)


def log(a: ArrayLike) -> Tensor:
    ta = as_tensor(a)
    data = np.log(ta.data)

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g / ta.data)

    return _make(data, (ta,), bwd)


def softplus(a: ArrayLike) -> Tensor:
    """log(1 + exp(x)) with the overflow-safe branch for large x."""
    ta = as_tensor(a)
    x = ta.data
    data = np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g / (1.0 + np.exp(-np.clip(x, -60.0, 60.0))))

    return _make(data, (ta,), bwd)


def abs_(a: ArrayLike) -> Tensor:
    """|x| with subgradient 0 at the origin."""
    ta = as_tensor(a)
    data = np.abs(ta.data)

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g * np.sign(ta.data))

    return _make(data, (ta,), bwd)


def maximum_scalar(a: ArrayLike, floor: float) -> Tensor:
    """Clamp below at ``floor``; gradient flows only above the clamp."""
    ta = as_tensor(a)
    data = np.maximum(ta.data, floor)

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g * (ta.data > floor))

    return _make(data, (ta,), bwd)


# ---------------------------------------------------------------------------
# Softmax family
# ---------------------------------------------------------------------------

def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    ta = as_tensor(a)
    if ta.data.size == 0:
        raise ValueError("softmax of an empty vector")
    shifted = ta.data - ta.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        if ta.requires_grad:
            dot = (g * data).sum(axis=axis, keepdims=True)
            _accumulate(ta, (g - dot) * data)

    return _make(data, (ta,), bwd)


def log_softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    ta = as_tensor(a)
    if ta.data.size == 0:
        raise ValueError("log_softmax of an empty vector")
    shifted = ta.data - ta.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g - np.exp(data) * g.sum(axis=axis, keepdims=True))

    return _make(data, (ta,), bwd)


# ---------------------------------------------------------------------------
# Dropout
# ---------------------------------------------------------------------------

def dropout(a: ArrayLike, rate: float, rng: Optional[np.random.Generator], train: bool) -> Tensor:
    """Inverted-scaling dropout: train-time activations are scaled by
    1/(1-rate) so eval mode is the identity."""
    if not (0.0 <= rate < 1.0):
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    ta = as_tensor(a)
    if not train or rate == 0.0:
        return ta
    if rng is None:
        raise ValueError("train-mode dropout requires an rng")
    mask = (rng.random(ta.data.shape) >= rate).astype(ta.data.dtype) / (1.0 - rate)
    data = ta.data * mask

    def bwd(g):
        if ta.requires_grad:
            _accumulate(ta, g * mask)

    return _make(data, (ta,), bwd)


# ---------------------------------------------------------------------------
# Backward driver
# ---------------------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Reverse-mode accumulation from a scalar loss into every reachable
    tensor with ``requires_grad``. Erroring on repeat calls guards against
    silently double-counted gradients."""
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if loss._consumed:
        raise RuntimeError("backward already called on this graph; rebuild the graph before differentiating again")
    loss._consumed = True
    if not loss.requires_grad:
        return

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
