from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .params import Parameters
from .tensor import Tensor, backward


@dataclass
class GradCheckReport:
    tolerance: float
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def failures(self) -> list[str]:
        return [k for k, v in self.errors.items() if v >= self.tolerance]

    def as_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "max_rel_error": self.max_error,
            "passed": self.passed,
            "per_parameter": dict(self.errors),
        }


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max abs deviation scaled by the larger of the two gradients' max magnitude."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
    diff = np.abs(analytic - numeric).max(initial=0.0)
    if scale < 1e-12:
        return float(diff)
    return float(diff / scale)


def finite_diff_check(closure: Callable[[], Tensor], params: Parameters, tolerance: float = 1e-3,
                      h: float = 1e-4, names: list[str] | None = None,
                      max_entries: int | None = None, seed: int = 0) -> GradCheckReport:
    """Compare reverse-mode gradients with central differences.

    ``closure`` rebuilds the loss from the current contents of ``params``; it
    must be deterministic (use eval-mode batch norm, or make sure running
    statistics do not feed the output).  ``max_entries`` samples that many
    coordinates per parameter instead of visiting all of them.
    """
    params.zero_grad()
    loss = closure()
    grads = backward(loss, params)
    rng = np.random.default_rng(seed)
    report = GradCheckReport(tolerance)
    for name, p in params.trainable_items():
        if names is not None and name not in names:
            continue
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, max_entries, replace=False))
        numeric = np.empty(len(idx))
        for k, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            up = closure().item()
            flat[i] = orig - h
            down = closure().item()
            flat[i] = orig
            numeric[k] = (up - down) / (2 * h)
        analytic = grads[name].data.reshape(-1)[idx]
        report.errors[name] = relative_error(analytic, numeric)
    return report
