"""Gradient-check battery covering every differentiable kernel plus the
composed encoder and joint-loss closures. Used by the CLI and the test
suite; all checks run in float64."""

from __future__ import annotations

import numpy as np

from . import losses
from . import tensor as T
from .gradcheck import grad_check
from .model import ClassifierConfig, EncoderConfig, Model
from .tensor import DiffTensor


def _t(rng, *shape):
    return DiffTensor(rng.standard_normal(shape), requires_grad=True)


def _kernel_cases(rng):
    """(name, closure, inputs) triples; three shapes per kernel."""
    cases = []
    for i, (b, d_in, d_out) in enumerate([(2, 3, 4), (1, 5, 2), (4, 2, 6)]):
        x, w = _t(rng, b, d_in), _t(rng, d_in, d_out)
        bias = _t(rng, d_out)
        cases.append((f"linear/{i}",
                      lambda x, w, bias: T.linear(x, w, bias).sum(),
                      [x, w, bias]))
    for i, (b, c_in, c_out, length, k, d) in enumerate(
            [(2, 3, 4, 7, 3, 1), (1, 2, 2, 9, 3, 2), (2, 1, 3, 11, 5, 4)]):
        x, w = _t(rng, b, c_in, length), _t(rng, c_out, c_in, k)
        mul = DiffTensor(rng.standard_normal((b, c_out, length)))
        cases.append((
            f"conv1d_dilated/{i}",
            lambda x, w, d=d, mul=mul:
                T.mul(T.conv1d_dilated(x, w, dilation=d), mul).sum(),
            [x, w]))
    for i, (b, c, length) in enumerate([(2, 3, 6), (1, 2, 5), (3, 1, 7)]):
        x = _t(rng, b, c, length)
        mul = DiffTensor(rng.standard_normal((b, c, (length + 1) // 2)))
        cases.append((f"maxpool1d/{i}",
                      lambda x, mul=mul: T.mul(T.maxpool1d(x), mul).sum(),
                      [x]))
    for i, shape in enumerate([(3, 4), (2, 3, 5), (6,)]):
        x = _t(rng, *shape)
        cases.append((f"relu/{i}", lambda x: T.relu(x).sum(), [x]))
    for i, (b, k) in enumerate([(4, 3), (2, 5), (1, 4)]):
        x = _t(rng, b, k)
        mul = DiffTensor(rng.standard_normal((b, k)))
        cases.append((f"softmax/{i}",
                      lambda x, mul=mul: T.mul(T.softmax(x), mul).sum(),
                      [x]))
    for i, (b, k) in enumerate([(4, 3), (2, 3), (5, 3)]):
        x = _t(rng, b, k)
        labels = rng.integers(0, k, size=b)
        cases.append((f"cross_entropy/{i}",
                      lambda x, labels=labels:
                          T.cross_entropy(T.softmax(x), labels),
                      [x]))
    for i, (b, k) in enumerate([(3, 4), (2, 6), (1, 3)]):
        x = _t(rng, b, k)
        cases.append((f"logsumexp/{i}",
                      lambda x: T.logsumexp(x).sum(), [x]))
    for i, (b, m, n, p) in enumerate([(2, 3, 4, 2), (1, 2, 2, 3), (3, 4, 2, 4)]):
        a, b_ = _t(rng, b, m, n), _t(rng, b, n, p)
        cases.append((f"matmul/{i}", lambda a, b_: (a @ b_).sum(), [a, b_]))
    return cases


def _toy_model(rng):
    enc = EncoderConfig(in_channels=3, hidden_dim=8, repr_dim=12, n_blocks=2,
                        dilation_schedule=(1, 2))
    clf = ClassifierConfig(in_dim=12, conv_channels=8, fc_dims=(6,))
    return Model(enc, clf, seed=rng.integers(2**31), dtype=np.float64)


def _composite_cases(rng):
    """Encoder forward + HCL and the full joint objective on toy configs
    (B=2, T=8, C=3)."""
    cases = []
    model = _toy_model(rng)
    x = rng.standard_normal((2, 8, 3))
    mask1 = (rng.random((2, 6)) >= 0.5).astype(np.int8)
    labels = np.array([0, 2])
    params = model.parameters()

    def encoder_hcl(*ps):
        z1 = model.encode(x[:, 0:6, :], mask=mask1)
        z2 = model.encode(x[:, 2:8, :])
        loss, _ = losses.hcl_loss(z1[:, 2:6, :], z2[:, 0:4, :])
        return loss

    def joint(*ps):
        z1 = model.encode(x[:, 0:6, :], mask=mask1)
        z2 = model.encode(x[:, 2:8, :])
        hcl, bd = losses.hcl_loss(z1[:, 2:6, :], z2[:, 0:4, :])
        probs = model.classify(DiffTensor(x))
        total, _ = losses.joint_loss(hcl, probs, labels, 1.0, bd)
        return total

    cases.append(("encoder+hcl", encoder_hcl, params))
    cases.append(("joint_objective", joint, params))
    return cases


def gradcheck_battery(seed=0, eps=1e-5, tol_rel=1e-4, include_composite=True):
    """Run every check; returns a list of (name, GradCheckReport)."""
    rng = np.random.default_rng(seed)
    cases = _kernel_cases(rng)
    if include_composite:
        cases += _composite_cases(rng)
    results = []
    for name, closure, inputs in cases:
        results.append((name, grad_check(closure, inputs, eps=eps,
                                         tol_rel=tol_rel)))
    return results
