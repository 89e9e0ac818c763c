"""Dense float64 tensors with tape-based reverse-mode differentiation.

Everything is stored as contiguous row-major float64; ops executed while a
Tape is active append a record with a vector-Jacobian closure. backward()
walks the records once, in reverse, accumulating gradients per tensor id,
so identical tapes give bit-identical gradients. Tensors are immutable
values once produced; independent tapes may run on different threads (the
active tape is thread-local).
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, NumericError, ShapeError

_ids = itertools.count()
_local = threading.local()


def _active_tape():
    return getattr(_local, "tape", None)


class Tensor:
    """Immutable float64 array participating in automatic differentiation."""

    __slots__ = ("data", "id")

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, id={self.id})"

    # operator sugar; scalars and ndarrays are lifted to constant tensors
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, key):
        return slice_(self, key)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Record:
    __slots__ = ("name", "in_ids", "out_id", "vjp")

    def __init__(self, name, in_ids, out_id, vjp):
        self.name = name
        self.in_ids = in_ids
        self.out_id = out_id
        self.vjp = vjp


class Tape:
    """Ordered computation trace supporting one reverse sweep."""

    def __init__(self):
        self.records: list[_Record] = []

    def backward(self, output: Tensor) -> dict[int, np.ndarray]:
        """Gradients of a scalar output w.r.t. every tensor on the tape."""
        if output.size != 1:
            raise ContractError(f"backward needs a scalar output, got shape {output.shape}")
        grads: dict[int, np.ndarray] = {output.id: np.ones_like(output.data)}
        for rec in reversed(self.records):
            g_out = grads.get(rec.out_id)
            if g_out is None:
                continue
            for tid, g in zip(rec.in_ids, rec.vjp(g_out)):
                if g is None:
                    continue
                if tid in grads:
                    # accumulation always allocates; vjp outputs may be views
                    grads[tid] = grads[tid] + g
                else:
                    grads[tid] = g
        return grads


@contextmanager
def tape():
    """Activate a fresh tape for the current thread."""
    t = Tape()
    prev = _active_tape()
    _local.tape = t
    try:
        yield t
    finally:
        _local.tape = prev


def _emit(name: str, out_data: np.ndarray, inputs: Sequence[Tensor], vjp: Callable) -> Tensor:
    out = Tensor(out_data)
    t = _active_tape()
    if t is not None:
        t.records.append(_Record(name, tuple(x.id for x in inputs), out.id, vjp))
    return out


def _require_finite(name: str, arr: np.ndarray):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} produced non-finite values")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the operand shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise arithmetic

def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    return _emit("add", out, (a, b), lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data
    return _emit("sub", out, (a, b), lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    ad, bd = a.data, b.data
    return _emit("mul", out, (a, b), lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data
    _require_finite("div", out)
    ad, bd = a.data, b.data
    return _emit(
        "div", out, (a, b),
        lambda g: (_unbroadcast(g / bd, ad.shape), _unbroadcast(-g * ad / (bd * bd), bd.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return _emit("neg", -a.data, (a,), lambda g: (-g,))


def power(a: Tensor, exponent: float) -> Tensor:
    p = float(exponent)
    out = a.data ** p
    _require_finite("power", out)
    ad = a.data
    return _emit("power", out, (a,), lambda g: (g * p * ad ** (p - 1.0),))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    _require_finite("exp", out)
    return _emit("exp", out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)
    _require_finite("log", out)
    return _emit("log", out, (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    _require_finite("sqrt", out)
    return _emit("sqrt", out, (a,), lambda g: (g * 0.5 / out,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _emit("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _emit("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def silu(a: Tensor) -> Tensor:
    """x * sigmoid(x); smooth activation used throughout the networks."""
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = a.data * s
    return _emit("silu", out, (a,), lambda g: (g * (s + out * (1.0 - s)),))


def minimum_const(a: Tensor, cap: float) -> Tensor:
    """min(a, cap) with the left derivative at the cap (grad 1 when a == cap)."""
    c = float(cap)
    out = np.minimum(a.data, c)
    mask = (a.data <= c).astype(np.float64)
    return _emit("minimum_const", out, (a,), lambda g: (g * mask,))


def lift_unary(fn: Callable, dfn: Callable, name: str) -> Callable[[Tensor], Tensor]:
    """Build a differentiable elementwise op from value and derivative maps."""

    def op(a: Tensor) -> Tensor:
        out = np.asarray(fn(a.data), dtype=np.float64)
        deriv = np.asarray(dfn(a.data), dtype=np.float64)
        return _emit(name, out, (a,), lambda g: (g * deriv,))

    return op


def stop_gradient(a: Tensor) -> Tensor:
    return Tensor(a.data)


# ---------------------------------------------------------------------------
# linear algebra, reductions, shape manipulation

def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = np.matmul(a.data, b.data)
    ad, bd = a.data, b.data

    def vjp(g):
        if ad.ndim == 1 and bd.ndim == 1:
            return g * bd, g * ad
        if ad.ndim == 1:
            ga = np.matmul(g, np.swapaxes(bd, -1, -2))
            gb = np.multiply.outer(ad, g) if bd.ndim == 2 else None
            if gb is None:
                raise ShapeError("unsupported matmul arity")
            return ga, gb
        if bd.ndim == 1:
            ga = np.multiply.outer(g, bd) if ad.ndim == 2 else g[..., None] * bd
            gb = np.matmul(np.swapaxes(ad, -1, -2), g[..., None] if ad.ndim > 2 else g)
            if ad.ndim > 2:
                gb = gb[..., 0]
                gb = _unbroadcast(gb, bd.shape)
            return ga, gb
        ga = _unbroadcast(np.matmul(g, np.swapaxes(bd, -1, -2)), ad.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(ad, -1, -2), g), bd.shape)
        return ga, gb

    return _emit("matmul", out, (a, b), vjp)


def sum_(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)
    shape = a.data.shape

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, shape),)
        g_exp = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(g_exp, shape),)

    return _emit("sum", out, (a,), vjp)


def mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    if axis is None:
        n = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([a.data.shape[ax] for ax in axes]))
    return sum_(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)
    orig = a.data.shape
    return _emit("reshape", out, (a,), lambda g: (g.reshape(orig),))


def transpose(a: Tensor, axes) -> Tensor:
    out = np.transpose(a.data, axes)
    inv = np.argsort(axes)
    return _emit("transpose", out, (a,), lambda g: (np.transpose(g, inv),))


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]
    return _emit("concat", out, tuple(parts), lambda g: tuple(np.split(g, splits, axis=axis)))


def broadcast_to(a: Tensor, shape) -> Tensor:
    out = np.broadcast_to(a.data, shape).copy()
    orig = a.data.shape
    return _emit("broadcast", out, (a,), lambda g: (_unbroadcast(g, orig),))


def slice_(a: Tensor, key) -> Tensor:
    out = a.data[key]
    shape = a.data.shape

    def vjp(g):
        full = np.zeros(shape, dtype=np.float64)
        full[key] = g
        return (full,)

    return _emit("slice", np.array(out, copy=True), (a,), vjp)


def place(a: Tensor, shape, key) -> Tensor:
    """Embed a into a zero canvas of the given shape at a basic-slice key."""
    canvas = np.zeros(shape, dtype=np.float64)
    canvas[key] = a.data
    orig = a.data.shape

    def vjp(g):
        return (np.array(g[key], dtype=np.float64).reshape(orig),)

    return _emit("place", canvas, (a,), vjp)


def embedding(table: Tensor, indices) -> Tensor:
    """Row lookup table[indices]; backward scatter-adds into the table."""
    idx = np.asarray(indices, dtype=np.intp)
    out = table.data[idx]
    shape = table.data.shape

    def vjp(g):
        full = np.zeros(shape, dtype=np.float64)
        np.add.at(full, idx, g)
        return (full,)

    return _emit("embedding", out, (table,), vjp)


def take_last(a: Tensor, indices) -> Tensor:
    """Gather along the last axis: out[..., ] = a[..., indices[...]]."""
    idx = np.asarray(indices, dtype=np.intp)
    if idx.shape != a.data.shape[:-1]:
        raise ShapeError(f"take_last indices {idx.shape} vs operand {a.data.shape}")
    out = np.take_along_axis(a.data, idx[..., None], axis=-1)[..., 0]
    shape = a.data.shape

    def vjp(g):
        full = np.zeros(shape, dtype=np.float64)
        np.put_along_axis(full, idx[..., None], g[..., None], axis=-1)
        return (full,)

    return _emit("take_last", out, (a,), vjp)


# ---------------------------------------------------------------------------
# fused numerically-sensitive ops

def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax; shift-invariant, rows sum to 1."""
    x = a.data
    if x.size == 0 or x.shape[axis] == 0:
        raise ShapeError("softmax of an empty vector")
    if not np.all(np.isfinite(x)):
        raise NumericError("softmax input contains NaN/Inf")
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((g - dot) * out,)

    return _emit("softmax", out, (a,), vjp)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    if x.size == 0 or x.shape[axis] == 0:
        raise ShapeError("log_softmax of an empty vector")
    if not np.all(np.isfinite(x)):
        raise NumericError("log_softmax input contains NaN/Inf")
    shifted = x - x.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)

    def vjp(g):
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return _emit("log_softmax", out, (a,), vjp)


LAYER_NORM_EPS = 1e-5


def layer_norm(x: Tensor, scale: Tensor, shift: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize over the last axis, then apply elementwise scale and shift."""
    d = x.data.shape[-1] if x.data.ndim else 0
    if d < 1:
        raise ShapeError("layer_norm needs a non-empty last axis")
    if scale.data.shape[-1] != d or shift.data.shape[-1] != d:
        raise ShapeError(
            f"layer_norm length mismatch: x {x.data.shape}, scale {scale.data.shape}, shift {shift.data.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * scale.data + shift.data
    sd = scale.data

    def vjp(g):
        g_shift = _unbroadcast(g, shift.data.shape)
        g_scale = _unbroadcast(g * xhat, scale.data.shape)
        gx_hat = g * sd
        gx = inv / d * (d * gx_hat - gx_hat.sum(axis=-1, keepdims=True) - xhat * (gx_hat * xhat).sum(axis=-1, keepdims=True))
        return gx, g_scale, g_shift

    return _emit("layer_norm", out, (x, scale, shift), vjp)


# ---------------------------------------------------------------------------
# gradient checking

def check_gradients(f: Callable[[np.ndarray], Tensor], point, step: float = 1e-5) -> float:
    """Max relative disagreement between tape gradients and central differences.

    f maps a raw array to a scalar Tensor; the error per coordinate is
    |analytic - central| / max(1, |analytic|).
    """
    point = np.asarray(point, dtype=np.float64)
    with tape() as t:
        leaf = Tensor(point)
        out = f(leaf)
        grads = t.backward(out)
    analytic = grads.get(leaf.id, np.zeros_like(point))

    worst = 0.0
    flat = point.reshape(-1)
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = step
        hi = f(Tensor((flat + bump).reshape(point.shape))).item()
        lo = f(Tensor((flat - bump).reshape(point.shape))).item()
        numeric = (hi - lo) / (2.0 * step)
        a = analytic.reshape(-1)[i]
        worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst
