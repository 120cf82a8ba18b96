"""Adam optimizer over :class:`~swrnli.tensor.Tensor` parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError
from .tensor import Tensor


@dataclass
class AdamState:
    step: int = 0
    first: list = field(default_factory=list)
    second: list = field(default_factory=list)


def adam_step(params, state: AdamState, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
    """Apply one bias-corrected Adam update in place and return ``state``."""
    if lr <= 0:
        raise ContractError(f"learning rate must be positive, got {lr}")
    for i, p in enumerate(params):
        if p.grad is None:
            raise ContractError(f"parameter {p.name or i} has no gradient")
    if not state.first:
        state.first = [np.zeros_like(p.data) for p in params]
        state.second = [np.zeros_like(p.data) for p in params]
    beta1, beta2 = betas
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for p, m, v in zip(params, state.first, state.second):
        g = p.grad
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return state


class Adam:
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params: list[Tensor] = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState()

    def step(self) -> None:
        adam_step(self.params, self.state, self.lr, self.betas, self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
