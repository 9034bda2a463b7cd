"""Central finite-difference gradient checking for DiffTensor closures.

Checks run in float64: finite differences are unusable at float32 precision,
so float32 inputs are rejected up front.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .tensor import DiffTensor, no_grad

# Relative-error denominator floor: keeps near-zero true gradients from
# blowing up the ratio on finite-difference noise.
_REL_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_err: float
    tol_rel: float
    eps: float
    n_elements: int
    worst_input: int = -1
    worst_index: int = -1
    per_input: list = field(default_factory=list)

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}: max rel err {self.max_rel_err:.3e} over "
                f"{self.n_elements} elements (tol {self.tol_rel:.1e})")


def grad_check(op_closure, inputs, eps=1e-5, tol_rel=1e-4):
    """Compare the backward pass of ``op_closure(*inputs)`` against central
    finite differences, element by element.

    op_closure must return a scalar DiffTensor built from the given inputs.
    Returns a GradCheckReport; passes iff the max relative error < tol_rel.
    """
    inputs = list(inputs)
    for i, t in enumerate(inputs):
        if not isinstance(t, DiffTensor):
            raise ContractError(f"grad_check: input {i} is not a DiffTensor")
        if t.dtype != np.float64:
            raise ContractError(
                f"grad_check: input {i} has dtype {t.dtype}; checks require float64")
        t.requires_grad = True
        t.zero_grad()

    out = op_closure(*inputs)
    if not isinstance(out, DiffTensor) or out.size != 1:
        raise ContractError("grad_check: closure must return a scalar DiffTensor")
    out.backward()
    analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
                for t in inputs]

    def forward():
        with no_grad():
            return float(op_closure(*inputs).data)

    max_rel = 0.0
    worst = (-1, -1)
    n_total = 0
    per_input = []
    for i, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        a_flat = analytic[i].reshape(-1)
        input_max = 0.0
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            f_plus = forward()
            flat[j] = orig - eps
            f_minus = forward()
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2 * eps)
            denom = max(abs(float(a_flat[j])), abs(numeric), _REL_FLOOR)
            rel = abs(float(a_flat[j]) - numeric) / denom
            if rel > input_max:
                input_max = rel
            if rel > max_rel:
                max_rel = rel
                worst = (i, j)
            n_total += 1
        per_input.append(input_max)

    return GradCheckReport(
        passed=max_rel < tol_rel,
        max_rel_err=max_rel,
        tol_rel=tol_rel,
        eps=eps,
        n_elements=n_total,
        worst_input=worst[0],
        worst_index=worst[1],
        per_input=per_input,
    )
