"""Differentiable operations.

Every op returns a new :class:`Tensor` whose ``_backward`` closure maps the
output gradient to parent gradients.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .tensor import ShapeMismatch, Tensor, as_tensor, default_dtype

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715


class IndexOutOfRange(IndexError):
    pass


def _needs(*ts: Tensor) -> bool:
    return any(t.requires_grad for t in ts)


def _make(data, parents, backward) -> Tensor:
    if _needs(*parents):
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeMismatch(f"cannot broadcast {a.shape} with {b.shape}") from exc


def _scatter_rows(ids: np.ndarray, rows: np.ndarray, num: int, weights=None) -> np.ndarray:
    """``out[k] = sum_{i: ids[i]=k} weights[i] * rows[i]`` via a sparse product."""
    n = len(ids)
    w = np.ones(n, dtype=rows.dtype) if weights is None else weights.astype(rows.dtype)
    mat = sp.csr_matrix((w, (ids, np.arange(n))), shape=(num, n))
    return np.asarray(mat @ rows)


# -- elementwise -----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    v = x.data
    inner = _SQRT_2_OVER_PI * (v + _GELU_C * v ** 3)
    t = np.tanh(inner)
    out = 0.5 * v * (1.0 + t)

    def backward(g):
        d_inner = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_C * v ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t ** 2) * d_inner),)

    return _make(out.astype(x.dtype), (x,), backward)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,))


# -- reductions and shape -------------------------------------------------

def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return _make(np.asarray(x.data.sum(), dtype=x.dtype), (x,),
                 lambda g: (np.broadcast_to(g, x.shape).astype(x.dtype),))


def mean(x: Tensor) -> Tensor:
    n = max(x.data.size, 1)
    return _make(np.asarray(x.data.mean(), dtype=x.dtype), (x,),
                 lambda g: (np.broadcast_to(g / n, x.shape).astype(x.dtype),))


def reshape(x: Tensor, shape) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    return _make(out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise ShapeMismatch("transpose expects a matrix")
    return _make(x.data.T.copy(), (x,), lambda g: (g.T,))


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    def backward(g):
        gx = np.zeros_like(x.data)
        gx[start:stop] = g
        return (gx,)

    return _make(x.data[start:stop].copy(), (x,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeMismatch(str(exc)) from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(out, tuple(tensors), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul shapes {a.shape} @ {b.shape}")
    return _make(a.data @ b.data, (a, b),
                 lambda g: (g @ b.data.T if a.requires_grad else None,
                            a.data.T @ g if b.requires_grad else None))


def spmm(mat: sp.spmatrix, x: Tensor) -> Tensor:
    """Constant sparse matrix times dense tensor."""
    if mat.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"spmm shapes {mat.shape} @ {x.shape}")
    mat = mat.astype(x.dtype)
    out = np.asarray(mat @ x.data)
    return _make(out, (x,), lambda g: (np.asarray(mat.T @ g),))


# -- indexing --------------------------------------------------------------

def embedding_gather(ids, codebook: Tensor) -> Tensor:
    """Rows ``codebook[ids]``."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= codebook.shape[0]):
        raise IndexOutOfRange(f"ids outside [0, {codebook.shape[0]})")
    out = codebook.data[ids]
    return _make(out, (codebook,), lambda g: (_scatter_rows(ids, g, codebook.shape[0]),))


gather = embedding_gather


def index_rows(x: Tensor, ids) -> Tensor:
    return embedding_gather(ids, x)


# -- normalization -----------------------------------------------------------

def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
               running_var: np.ndarray, training: bool, momentum: float = 0.1,
               eps: float = 1e-5) -> Tensor:
    """Batch normalization over rows.

    In training mode with at least two rows, batch statistics (population
    variance) normalize ``x`` and the running buffers are updated in place as
    ``running <- (1 - momentum) * running + momentum * batch``.  Otherwise the
    running statistics are used.
    """
    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ShapeMismatch(f"batch_norm shapes x={x.shape} gamma={gamma.shape} beta={beta.shape}")
    n = x.shape[0]
    v = x.data
    if training and n >= 2:
        mu = v.mean(axis=0)
        var = v.var(axis=0)
        running_mean *= (1.0 - momentum)
        running_mean += momentum * mu
        running_var *= (1.0 - momentum)
        running_var += momentum * var
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (v - mu) * inv

        def backward(g):
            dxhat = g * gamma.data
            dx = (inv / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
            return dx.astype(v.dtype), (g * xhat).sum(axis=0), g.sum(axis=0)
    else:
        inv = (1.0 / np.sqrt(running_var + eps)).astype(v.dtype)
        xhat = (v - running_mean.astype(v.dtype)) * inv

        def backward(g):
            return g * gamma.data * inv, (g * xhat).sum(axis=0), g.sum(axis=0)

    out = (xhat * gamma.data + beta.data).astype(v.dtype)
    return _make(out, (x, gamma, beta), backward)


# -- segment pooling ---------------------------------------------------------

def _check_segments(ids: np.ndarray, num_segments: int, n: int) -> None:
    if len(ids) != n:
        raise ShapeMismatch(f"{len(ids)} segment ids for {n} rows")
    if ids.size and (ids.min() < 0 or ids.max() >= num_segments):
        raise IndexOutOfRange(f"segment ids outside [0, {num_segments})")


def segment_mean(x: Tensor, segment_ids, num_segments: int) -> Tensor:
    ids = np.asarray(segment_ids, dtype=np.int64)
    _check_segments(ids, num_segments, x.shape[0])
    counts = np.bincount(ids, minlength=num_segments).astype(x.dtype)
    scale = 1.0 / np.maximum(counts, 1)
    out = _scatter_rows(ids, x.data, num_segments) * scale[:, None]

    def backward(g):
        return ((g * scale[:, None])[ids],)

    return _make(out.astype(x.dtype), (x,), backward)


def segment_max(x: Tensor, segment_ids, num_segments: int) -> Tensor:
    """Column-wise max per segment; empty segments give zero rows.

    The gradient goes to the first row (lowest index) attaining the max.
    """
    ids = np.asarray(segment_ids, dtype=np.int64)
    _check_segments(ids, num_segments, x.shape[0])
    n, d = x.shape
    best = np.full((num_segments, d), -np.inf, dtype=x.dtype)
    np.maximum.at(best, ids, x.data)
    hit = x.data == best[ids]
    first = np.full((num_segments, d), n, dtype=np.int64)
    rows = np.broadcast_to(np.arange(n)[:, None], (n, d))
    np.minimum.at(first, ids, np.where(hit, rows, n))
    empty = first == n
    out = np.where(empty, 0, best).astype(x.dtype)

    def backward(g):
        gx = np.zeros_like(x.data)
        seg, col = np.nonzero(~empty)
        gx[first[seg, col], col] = g[seg, col]
        return (gx,)

    return _make(out, (x,), backward)


# -- losses ----------------------------------------------------------------------

def log_softmax_np(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, target_ids, reduction: str = "mean") -> Tensor:
    """Cross-entropy of ``softmax(logits)`` against integer targets."""
    t = np.asarray(target_ids, dtype=np.int64)
    if logits.ndim != 2 or len(t) != logits.shape[0]:
        raise ShapeMismatch(f"logits {logits.shape} vs {len(t)} targets")
    c = logits.shape[1]
    if t.size and (t.min() < 0 or t.max() >= c):
        raise IndexOutOfRange(f"targets outside [0, {c})")
    logp = log_softmax_np(logits.data)
    nll = -logp[np.arange(len(t)), t]
    scale = 1.0 / max(len(t), 1) if reduction == "mean" else 1.0
    out = np.asarray(nll.sum() * scale, dtype=logits.dtype)

    def backward(g):
        grad = np.exp(logp)
        grad[np.arange(len(t)), t] -= 1.0
        return (grad * (g * scale),)

    return _make(out, (logits,), backward)


def mse_loss(pred: Tensor, target) -> Tensor:
    target = np.asarray(target, dtype=pred.dtype).reshape(pred.shape)
    diff = pred.data - target
    n = max(diff.size, 1)
    out = np.asarray((diff ** 2).sum() / n, dtype=pred.dtype)
    return _make(out, (pred,), lambda g: (g * 2.0 * diff / n,))


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=default_dtype()))
