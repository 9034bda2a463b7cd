"""Adam optimizer with bias correction, operating on DiffTensor parameters."""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .tensor import DiffTensor


class Adam:
    """Standard Adam. Moment arrays live in the parameter dtype; gradients
    are cleared after every step so stale values cannot leak across steps."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        for i, p in enumerate(self.params):
            if not isinstance(p, DiffTensor):
                raise ContractError(f"Adam: parameter {i} is not a DiffTensor")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ContractError(
                    f"Adam.step: parameter {i} (shape {p.data.shape}) has no gradient")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.first_moment, self.second_moment):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        self.zero_grad()

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def adam_step(params, state):
    """Functional form: apply one update through an existing Adam state."""
    if list(params) != state.params:
        raise ContractError("adam_step: params do not match the optimizer state")
    state.step()
    return state
