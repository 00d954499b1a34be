"""Dense 2-D tensor arithmetic with reverse-mode automatic differentiation.

Graphs are dynamic: every primitive records a backward closure on the
currently active Tape, which is rebuilt per sentence. Outside a tape the
same primitives run forward-only, so decoding costs no graph memory.
All tensors are 2-D matrices; scalars are (1, 1).
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, NumericError

_DTYPES = {"float32": np.float32, "float64": np.float64}
_default_dtype = np.float32

_tape = None  # active Tape or None


def set_default_dtype(name: str):
    """Pick the working precision: float32 (default) or float64 (gradient checks)."""
    global _default_dtype
    if name not in _DTYPES:
        raise ValueError(f"unknown dtype {name!r}")
    _default_dtype = _DTYPES[name]


def default_dtype():
    return _default_dtype


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic generator for parameter init and dropout masks."""
    return np.random.Generator(np.random.PCG64(seed))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype or _default_dtype)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ContractError(f"tensors are 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.grad is not None else 'no'})"


def tensor(data, dtype=None) -> Tensor:
    return Tensor(data, dtype=dtype)


def zeros(rows, cols, requires_grad=False, dtype=None) -> Tensor:
    return Tensor(np.zeros((rows, cols)), requires_grad=requires_grad, dtype=dtype)


def uniform_param(rows, cols, rng, scale=0.08, dtype=None) -> Tensor:
    """Trainable tensor initialized uniformly in [-scale, scale]."""
    data = rng.uniform(-scale, scale, size=(rows, cols))
    return Tensor(data, requires_grad=True, dtype=dtype)


class Tape:
    """Ordered record of primitives; reverse walk accumulates exact gradients."""

    def __init__(self):
        self._ops = []

    def __enter__(self):
        global _tape
        self._prev = _tape
        _tape = self
        return self

    def __exit__(self, *exc):
        global _tape
        _tape = self._prev
        return False

    def record(self, out, backward_fn):
        self._ops.append((out, backward_fn))

    def backward(self, loss: Tensor):
        if loss.data.size != 1:
            raise ContractError(f"backward from non-scalar of shape {loss.shape}")
        loss.accumulate(np.ones_like(loss.data))
        for out, fn in reversed(self._ops):
            if out.grad is not None:
                fn(out.grad)


def _recording(*parents) -> bool:
    return _tape is not None and any(p.requires_grad for p in parents)


def _emit(data, backward_fn, *parents) -> Tensor:
    out = Tensor(data, dtype=data.dtype)
    if _recording(*parents):
        out.requires_grad = True
        _tape.record(out, backward_fn(out, *parents))
    return out


# -- primitives ---------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ContractError(f"matmul: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def bw(out, a, b):
        def fn(g):
            if a.requires_grad:
                a.accumulate(g @ b.data.T)
            if b.requires_grad:
                b.accumulate(a.data.T @ g)
        return fn

    return _emit(data, bw, a, b)


def transpose(a: Tensor) -> Tensor:
    def bw(out, a):
        return lambda g: a.accumulate(g.T)

    return _emit(np.ascontiguousarray(a.data.T), bw, a)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may be a (1, n) row broadcast over a's rows."""
    if a.shape != b.shape and not (b.shape == (1, a.shape[1])):
        raise ContractError(f"add: {a.shape} + {b.shape}")
    data = a.data + b.data

    def bw(out, a, b):
        def fn(g):
            if a.requires_grad:
                a.accumulate(g)
            if b.requires_grad:
                b.accumulate(g if b.shape == g.shape else g.sum(axis=0, keepdims=True))
        return fn

    return _emit(data, bw, a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ContractError(f"mul: {a.shape} * {b.shape}")

    def bw(out, a, b):
        def fn(g):
            if a.requires_grad:
                a.accumulate(g * b.data)
            if b.requires_grad:
                b.accumulate(g * a.data)
        return fn

    return _emit(a.data * b.data, bw, a, b)


def scale(a: Tensor, c: float) -> Tensor:
    def bw(out, a):
        return lambda g: a.accumulate(g * c)

    return _emit(a.data * c, bw, a)


def concat(tensors, axis: int) -> Tensor:
    if axis not in (0, 1):
        raise ContractError(f"concat: axis {axis}")
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)

    def bw(out, *parents):
        def fn(g):
            off = 0
            for t in parents:
                size = t.shape[axis]
                piece = g[off:off + size] if axis == 0 else g[:, off:off + size]
                if t.requires_grad:
                    t.accumulate(piece)
                off += size
        return fn

    return _emit(data, bw, *tensors)


def slice_cols(a: Tensor, start: int, end: int) -> Tensor:
    if not (0 <= start < end <= a.shape[1]):
        raise ContractError(f"slice: [{start}:{end}] of {a.shape}")

    def bw(out, a):
        def fn(g):
            full = np.zeros_like(a.data)
            full[:, start:end] = g
            a.accumulate(full)
        return fn

    return _emit(np.ascontiguousarray(a.data[:, start:end]), bw, a)


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))

    def bw(out, a):
        return lambda g: a.accumulate(g * out.data * (1.0 - out.data))

    return _emit(y, bw, a)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def bw(out, a):
        return lambda g: a.accumulate(g * (1.0 - out.data * out.data))

    return _emit(y, bw, a)


def softmax(a: Tensor) -> Tensor:
    """Row-wise softmax, numerically stabilized."""
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def bw(out, a):
        def fn(g):
            dot = (g * out.data).sum(axis=1, keepdims=True)
            a.accumulate(out.data * (g - dot))
        return fn

    return _emit(y, bw, a)


def embedding_gather(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.intp)
    if ids.ndim != 1 or ids.size == 0:
        raise ContractError("embedding_gather: ids must be a non-empty 1-D index list")
    if ids.max() >= table.shape[0] or ids.min() < 0:
        raise ContractError(f"embedding_gather: id out of range for table {table.shape}")

    def bw(out, table):
        def fn(g):
            if table.requires_grad:
                if table.grad is None:
                    table.grad = np.zeros_like(table.data)
                np.add.at(table.grad, ids, g)
        return fn

    return _emit(table.data[ids], bw, table)


def dropout(a: Tensor, p: float, train: bool, rng) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    if not train or p <= 0.0:
        return a
    mask = (rng.random(a.shape) >= p).astype(a.data.dtype) / (1.0 - p)

    def bw(out, a):
        return lambda g: a.accumulate(g * mask)

    return _emit(a.data * mask, bw, a)


def tsum(a: Tensor) -> Tensor:
    def bw(out, a):
        return lambda g: a.accumulate(np.full_like(a.data, g.reshape(-1)[0]))

    return _emit(a.data.sum().reshape(1, 1), bw, a)


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """Negative log softmax probability of the target column of a (1, m) row."""
    if logits.shape[0] != 1:
        raise ContractError(f"cross_entropy: expected a (1, m) row, got {logits.shape}")
    if not (0 <= target < logits.shape[1]):
        raise ContractError(f"cross_entropy: target {target} outside (1, {logits.shape[1]})")
    row = logits.data[0]
    m = row.max()
    lse = m + np.log(np.exp(row - m).sum())
    loss = np.array([[lse - row[target]]], dtype=logits.data.dtype)

    def bw(out, logits):
        def fn(g):
            p = np.exp(row - lse).reshape(1, -1)
            p[0, target] -= 1.0
            logits.accumulate(g.reshape(-1)[0] * p)
        return fn

    return _emit(loss, bw, logits)


def log_softmax_row(logits: Tensor) -> np.ndarray:
    """Forward-only log softmax of a (1, m) row (decode scoring path)."""
    row = logits.data[0]
    m = row.max()
    return row - (m + np.log(np.exp(row - m).sum()))


# -- optimization --------------------------------------------------------------


def grad_global_norm(params) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    return float(np.sqrt(total))


def sgd_step(params, lr: float, clip_norm: float | None = None):
    """p <- p - lr*g after global-norm clipping; clears all grads."""
    params = list(params)
    norm = grad_global_norm(params)
    if not np.isfinite(norm):
        raise NumericError(f"non-finite gradient norm {norm}")
    factor = 1.0
    if clip_norm is not None and norm > clip_norm > 0:
        factor = clip_norm / norm
    step = lr * factor
    for p in params:
        if p.grad is not None:
            p.data -= step * p.grad
            p.grad = None
