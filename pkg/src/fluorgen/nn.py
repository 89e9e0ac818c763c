"""Parameter containers, layers, and the AdamW optimizer.

Parameters are leaf Tensors registered in a ParamStore under stable dotted
names; the registration order defines the checkpoint manifest. Training is
single-writer: the optimizer updates parameter arrays in place between
tape passes, which never alias op outputs.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .errors import ContractError
from .tensor import Tensor


class ParamStore:
    def __init__(self):
        self._entries: dict[str, Tensor] = {}

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._entries:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(array, dtype=np.float64))
        self._entries[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def n_params(self) -> int:
        return sum(t.size for t in self._entries.values())

    def load_arrays(self, arrays: dict[str, np.ndarray]):
        if set(arrays) != set(self._entries):
            missing = set(self._entries) - set(arrays)
            extra = set(arrays) - set(self._entries)
            raise ContractError(f"parameter set mismatch: missing={sorted(missing)}, extra={sorted(extra)}")
        for name, arr in arrays.items():
            t = self._entries[name]
            if t.data.shape != arr.shape:
                raise ContractError(f"shape mismatch for {name}: {t.data.shape} vs {arr.shape}")
            t.data[...] = arr


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class Dense:
    """Affine map on the last axis: x @ W + b."""

    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator, bias: bool = True, zero_init: bool = False):
        w0 = np.zeros((n_in, n_out)) if zero_init else glorot(rng, n_in, n_out)
        self.w = store.add(f"{name}.w", w0)
        self.b = store.add(f"{name}.b", np.zeros(n_out)) if bias else None
        self.n_in, self.n_out = n_in, n_out

    def __call__(self, x: Tensor) -> Tensor:
        y = x @ self.w
        return y + self.b if self.b is not None else y


class LayerNorm:
    def __init__(self, store: ParamStore, name: str, dim: int, elementwise: bool = True):
        if elementwise:
            self.scale = store.add(f"{name}.scale", np.ones(dim))
            self.shift = store.add(f"{name}.shift", np.zeros(dim))
        else:
            self.scale = Tensor(np.ones(dim))
            self.shift = Tensor(np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.scale, self.shift)


class GatedTransition:
    """phi_c(silu(phi_a(x)) * phi_b(x)) feed-forward block."""

    def __init__(self, store: ParamStore, name: str, dim: int, hidden: int, rng: np.random.Generator):
        self.a = Dense(store, f"{name}.a", dim, hidden, rng)
        self.b = Dense(store, f"{name}.b", dim, hidden, rng)
        self.c = Dense(store, f"{name}.c", hidden, dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.c(T.silu(self.a(x)) * self.b(x))


def split_heads(x: Tensor, heads: int) -> Tensor:
    """(B, n, d) -> (B, heads, n, d // heads)."""
    b, n, d = x.shape
    return T.transpose(T.reshape(x, (b, n, heads, d // heads)), (0, 2, 1, 3))


def merge_heads(x: Tensor) -> Tensor:
    b, h, n, dh = x.shape
    return T.reshape(T.transpose(x, (0, 2, 1, 3)), (b, n, h * dh))


def attention(q: Tensor, k: Tensor, v: Tensor, heads: int, bias=None) -> Tensor:
    """Multi-head scaled dot-product attention over (B, n, d) operands.

    bias is an optional additive array broadcastable to (B, heads, n, n);
    padding/causal masks enter as large negative entries.
    """
    qh, kh, vh = split_heads(q, heads), split_heads(k, heads), split_heads(v, heads)
    dh = qh.shape[-1]
    logits = T.matmul(qh, T.transpose(kh, (0, 1, 3, 2))) * (1.0 / math.sqrt(dh))
    if bias is not None:
        logits = logits + bias
    weights = T.softmax(logits, axis=-1)
    return merge_heads(T.matmul(weights, vh))


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray | None:
    if rate <= 0.0:
        return None
    keep = (rng.random(shape) >= rate).astype(np.float64)
    return keep / (1.0 - rate)


class AdamW:
    """Decoupled weight decay Adam; state keyed by parameter name."""

    def __init__(self, store: ParamStore, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.store = store
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self, grads: dict[int, np.ndarray], lr: float | None = None):
        """Apply one update from tape gradients (keyed by tensor id)."""
        lr = self.lr if lr is None else lr
        self.step_count += 1
        b1c = 1.0 - self.beta1 ** self.step_count
        b2c = 1.0 - self.beta2 ** self.step_count
        for name, t in self.store.items():
            g = grads.get(t.id)
            if g is None:
                continue
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / b1c) / (np.sqrt(v / b2c) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * t.data
            t.data -= lr * update


def cosine_lr(step: int, total: int, lr_start: float, lr_end: float) -> float:
    if total <= 1:
        return lr_end
    frac = min(max(step / (total - 1), 0.0), 1.0)
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + math.cos(math.pi * frac))
