"""Central finite-difference verification of tape gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward, no_grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    n_checked: int
    worst: tuple[int, int] | None = None  # (input position, flat index)

    def __bool__(self) -> bool:
        return self.passed


def grad_check(f: Callable, x: Tensor | Sequence[Tensor], step: float = 1e-3,
               tol: float = 1e-4, floor: float = 1e-6) -> GradCheckReport:
    """Compare the tape gradient of scalar ``f(x)`` with central differences.

    The error per coordinate is ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``;
    ``floor`` keeps round-off on vanishing gradients from counting as relative error.
    ``f`` must be deterministic (re-seed any dropout/noise source inside it).
    """
    inputs = [x] if isinstance(x, Tensor) else list(x)
    saved = [t.grad for t in inputs]
    for t in inputs:
        t.grad = None
    loss = f(x)
    backward(loss)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]
    for t, g in zip(inputs, saved):
        t.grad = g

    worst_err, worst, count = 0.0, None, 0
    with no_grad():
        for pos, t in enumerate(inputs):
            flat = t.data.reshape(-1)
            for k in range(flat.size):
                original = flat[k]
                flat[k] = original + step
                plus = float(f(x).data)
                flat[k] = original - step
                minus = float(f(x).data)
                flat[k] = original
                numeric = (plus - minus) / (2.0 * step)
                a = analytic[pos].reshape(-1)[k]
                err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
                count += 1
                if err > worst_err or worst is None:
                    worst_err, worst = err, (pos, k)
    return GradCheckReport(worst_err, worst_err <= tol, count, worst)
