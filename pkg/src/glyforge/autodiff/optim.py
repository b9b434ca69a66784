from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import Parameters
from .tensor import ShapeMismatch, Tensor


@dataclass
class AdamState:
    """Adam moments plus per-parameter learning rates.

    ``lr_scale`` maps a parameter-name prefix to a multiplier of ``lr``; the
    longest matching prefix wins.
    """

    lr: float = 5e-4
    weight_decay: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    lr_scale: dict[str, float] = field(default_factory=dict)

    def lr_for(self, name: str) -> float:
        best, scale = -1, 1.0
        for prefix, s in self.lr_scale.items():
            if name.startswith(prefix) and len(prefix) > best:
                best, scale = len(prefix), s
        return self.lr * scale


def adam_step(params: Parameters, grads: dict[str, Tensor | np.ndarray], state: AdamState) -> None:
    """One bias-corrected Adam update, in place.

    Weight decay is decoupled: ``p <- p - lr * wd * p`` precedes the moment
    update.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in params.trainable_items():
        g = grads.get(name)
        if g is None:
            continue
        g = g.data if isinstance(g, Tensor) else np.asarray(g)
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        lr = state.lr_for(name)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        if state.weight_decay:
            p.data -= (lr * state.weight_decay) * p.data
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= (lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)).astype(p.dtype)
