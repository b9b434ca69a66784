from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeMismatch(ValueError):
    pass


class GraphConsumed(RuntimeError):
    pass


_state = threading.local()


def default_dtype():
    return getattr(_state, "dtype", np.float32)


@contextlib.contextmanager
def precision(dtype):
    """Create new tensors in ``dtype`` (use ``np.float64`` for gradient checks)."""
    prev = default_dtype()
    _state.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _state.dtype = prev


class MemoryTracker:
    """High-water mark of bytes held by live tensor buffers and gradients."""

    def __init__(self):
        self.current = 0
        self.peak = 0
        self._lock = threading.Lock()

    def alloc(self, nbytes: int) -> None:
        with self._lock:
            self.current += nbytes
            if self.current > self.peak:
                self.peak = self.current

    def free(self, nbytes: int) -> None:
        with self._lock:
            self.current -= nbytes

    def reset_peak(self) -> None:
        with self._lock:
            self.peak = self.current


TRACKER = MemoryTracker()


class Tensor:
    """Dense array with an optional recorded backward rule.

    ``_backward`` maps the output gradient to one gradient per parent (or
    ``None`` for parents that do not need one).
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_consumed", "_nbytes",
                 "__weakref__")

    def __init__(self, data, requires_grad: bool = False, dtype=None,
                 _parents: Sequence["Tensor"] = (), _backward: Callable | None = None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype if dtype is not None else None)
        if dtype is None and not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(default_dtype())
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = tuple(_parents)
        self._backward = _backward
        self._consumed = False
        self._nbytes = arr.nbytes
        TRACKER.alloc(self._nbytes)

    def __del__(self):
        try:
            TRACKER.free(self._nbytes)
        except AttributeError:
            pass

    # -- basic protocol -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # -- operators ------------------------------------------------------
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    @property
    def T(self):
        from . import ops
        return ops.transpose(self)

    def sum(self):
        from . import ops
        return ops.sum(self)

    def mean(self):
        from . import ops
        return ops.mean(self)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=default_dtype()))


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params=None, retain_graph: bool = False):
    """Reverse-mode sweep from the scalar ``loss``.

    Leaf tensors accumulate into ``.grad``.  When ``params`` (a
    :class:`~glyforge.autodiff.params.Parameters`) is given, returns a map
    name -> gradient :class:`Tensor` for every trainable parameter, with zeros
    for parameters the loss does not depend on.  The recorded graph is freed
    afterwards unless ``retain_graph`` is set.
    """
    if loss._consumed:
        raise GraphConsumed("the graph behind this tensor was already freed by backward()")
    if loss.data.size != 1:
        raise ShapeMismatch(f"backward() needs a scalar loss, got shape {loss.shape}")
    order = _topo_order(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    TRACKER.alloc(loss.data.nbytes)
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        TRACKER.free(g.nbytes)
        parent_grads = node._backward(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            if pg.shape != p.shape:
                raise ShapeMismatch(f"gradient shape {pg.shape} != tensor shape {p.shape}")
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + pg
            else:
                grads[id(p)] = pg
                TRACKER.alloc(pg.nbytes)
    if not retain_graph:
        for node in order:
            if node._backward is not None:
                node._backward = None
                node._parents = ()
                node._consumed = True
    if params is None:
        return None
    out = {}
    for name, t in params.trainable_items():
        g = t.grad if t.grad is not None else np.zeros_like(t.data)
        out[name] = Tensor(g)
    return out


def zero_grad(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None
