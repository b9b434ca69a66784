from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Tensor


class Parameters:
    """Ordered name -> tensor store.

    Trainable entries carry ``requires_grad``; buffers (e.g. batch-norm
    running statistics) do not and are skipped by the optimizer.
    """

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}
        self._buffers: set[str] = set()

    def add(self, name: str, value, trainable: bool = True) -> Tensor:
        if name in self._tensors:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(value, copy=True), requires_grad=trainable)
        self._tensors[name] = t
        if not trainable:
            self._buffers.add(name)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._tensors.items())

    def trainable_items(self) -> Iterator[tuple[str, Tensor]]:
        return ((k, v) for k, v in self._tensors.items() if k not in self._buffers)

    def is_trainable(self, name: str) -> bool:
        return name in self._tensors and name not in self._buffers

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def astype(self, dtype) -> "Parameters":
        """Deep copy with every tensor cast to ``dtype``."""
        out = Parameters()
        for name, t in self._tensors.items():
            data = t.data if dtype is None else t.data.astype(dtype)
            out.add(name, data, trainable=name not in self._buffers)
        return out

    def copy(self) -> "Parameters":
        return self.astype(None)

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self._tensors.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, value in state.items():
            t = self._tensors[name]
            if t.data.shape != value.shape:
                raise ValueError(f"shape mismatch for {name}: {t.data.shape} vs {value.shape}")
            t.data = np.array(value, dtype=t.data.dtype, copy=True)

    def buffers(self) -> set[str]:
        return set(self._buffers)
