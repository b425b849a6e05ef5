"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a contiguous row-major numpy float64 array plus an
optional gradient of the same shape. Operations record a dynamic tape:
each result keeps references to its input tensors and a closure that
accumulates gradients into them. ``backward`` on a scalar walks the tape
in reverse topological order.

Everything is 64-bit and single-threaded by design; tensors are value
semantic (construction copies) and safe to share read-only.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables tape recording inside its block."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar; the module-level functions do the real work
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes: Sequence[int]) -> "Tensor":
        return transpose(self, axes)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tmean(self, axis=axis, keepdims=keepdims)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _tracked(*tensors: Tensor) -> bool:
    return _GRAD_ENABLED and any(t.requires_grad for t in tensors)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], grad_fn) -> Tensor:
    out = Tensor(data)
    if _tracked(*parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
    return out


def _accumulate(t: Tensor, grad: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(grad, dtype=np.float64)
    else:
        t.grad += grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise ops


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def grad_fn(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _result(data, (a, b), grad_fn)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data - b.data

    def grad_fn(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, -_unbroadcast(g, b.shape))

    return _result(data, (a, b), grad_fn)


def mul(a, b) -> Tensor:
    if isinstance(b, (int, float)) and isinstance(a, Tensor):
        scalar = float(b)
        data = a.data * scalar

        def grad_fn(g):
            _accumulate(a, g * scalar)

        return _result(data, (a,), grad_fn)
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def grad_fn(g):
        _accumulate(a, _unbroadcast(g * b.data, a.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _result(data, (a, b), grad_fn)


def neg(a: Tensor) -> Tensor:
    def grad_fn(g):
        _accumulate(a, -g)

    return _result(-a.data, (a,), grad_fn)


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)

    def grad_fn(g):
        _accumulate(a, g * (a.data > 0.0))

    return _result(data, (a,), grad_fn)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents differ: {a.shape} vs {b.shape}")
    data = np.matmul(a.data, b.data)

    def grad_fn(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        _accumulate(a, _unbroadcast(ga, a.shape))
        _accumulate(b, _unbroadcast(gb, b.shape))

    return _result(data, (a, b), grad_fn)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map with an (out, in) weight: x @ weight.T + bias."""
    axes = tuple(range(weight.ndim - 2)) + (weight.ndim - 1, weight.ndim - 2)
    out = matmul(x, transpose(weight, axes))
    if bias is not None:
        out = add(out, bias)
    return out


# ---------------------------------------------------------------------------
# normalization


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` with max-subtraction for overflow safety."""
    if not np.isfinite(x.data).all():
        raise NumericError("softmax input contains non-finite values")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    data = ex / ex.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        _accumulate(x, data * (g - inner))

    return _result(data, (x,), grad_fn)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, axis: int = -1,
               eps: float = 1e-5) -> Tensor:
    """Normalize to zero mean, unit population variance along ``axis``,
    then apply the learnable affine (gamma, beta).

    gamma and beta are 1-D with the extent of the normalized axis; eps
    keeps zero-variance slices finite.
    """
    n = x.shape[axis]
    if gamma.shape != (n,) or beta.shape != (n,):
        raise ShapeError(
            f"layer_norm affine extents {gamma.shape}/{beta.shape} do not match axis extent {n}")
    bshape = [1] * x.ndim
    bshape[axis] = n
    gamma_b = gamma.data.reshape(bshape)
    beta_b = beta.data.reshape(bshape)

    mu = x.data.mean(axis=axis, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    data = xhat * gamma_b + beta_b

    def grad_fn(g):
        reduce_axes = tuple(i for i in range(x.ndim) if i != (axis % x.ndim))
        _accumulate(beta, g.sum(axis=reduce_axes))
        _accumulate(gamma, (g * xhat).sum(axis=reduce_axes))
        gh = g * gamma_b
        gh_mean = gh.mean(axis=axis, keepdims=True)
        ghx_mean = (gh * xhat).mean(axis=axis, keepdims=True)
        _accumulate(x, inv * (gh - gh_mean - xhat * ghx_mean))

    return _result(data, (x, gamma, beta), grad_fn)


# ---------------------------------------------------------------------------
# movement ops


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    data = x.data.reshape(shape)

    def grad_fn(g):
        _accumulate(x, g.reshape(x.shape))

    return _result(data, (x,), grad_fn)


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    data = np.transpose(x.data, axes)
    inverse = tuple(np.argsort(axes))

    def grad_fn(g):
        _accumulate(x, np.transpose(g, inverse))

    return _result(data, (x,), grad_fn)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(idx)])

    return _result(data, tensors, grad_fn)


def getitem(x: Tensor, key) -> Tensor:
    data = np.array(x.data[key])

    def grad_fn(g):
        full = np.zeros_like(x.data)
        full[key] = g
        _accumulate(x, full)

    return _result(data, (x,), grad_fn)


def take_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup along axis 0 (embedding gather)."""
    ids = np.asarray(ids, dtype=np.int64)
    data = table.data[ids]

    def grad_fn(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        _accumulate(table, full)

    return _result(data, (table,), grad_fn)


def expand_batch(x: Tensor, batch: int) -> Tensor:
    """Tile a tensor along a new leading batch axis."""
    data = np.broadcast_to(x.data, (batch,) + x.shape).copy()

    def grad_fn(g):
        _accumulate(x, g.sum(axis=0))

    return _result(data, (x,), grad_fn)


# ---------------------------------------------------------------------------
# reductions


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = x.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is None:
            _accumulate(x, np.broadcast_to(g, x.shape))
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, x.shape))

    return _result(data, (x,), grad_fn)


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.size if axis is None else x.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# ---------------------------------------------------------------------------
# backward pass


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tensor the scalar ``loss`` depends on."""
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    loss.grad = np.ones_like(loss.data)
    if loss._grad_fn is None:
        return

    # iterative topological sort; unrolled graphs can be deep
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent._grad_fn is not None and id(parent) not in seen:
                stack.append((parent, False))

    for node in reversed(order):
        if node._grad_fn is not None and node.grad is not None:
            node._grad_fn(node.grad)


# ---------------------------------------------------------------------------
# verification harness


def finite_difference_check(f: Callable[[Tensor], Tensor], x, h: float = 1e-5) -> float:
    """Compare the tape gradient of ``f`` at ``x`` against central differences.

    Returns the max over coordinates of
    |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
    """
    base = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    probe = Tensor(base.copy(), requires_grad=True)
    backward(f(probe))
    analytic = (probe.grad if probe.grad is not None else np.zeros_like(probe.data)).ravel()

    flat = probe.data.ravel()
    worst = 0.0
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f(probe).item()
            flat[i] = orig - h
            fm = f(probe).item()
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            err = abs(analytic[i] - numeric) / (abs(analytic[i]) + abs(numeric) + 1e-12)
            worst = max(worst, err)
    return worst
