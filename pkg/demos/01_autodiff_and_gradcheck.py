"""Tour of the differentiable kernels and the finite-difference checker.

Builds each kernel on small random tensors, backpropagates a scalar, and
compares every analytic gradient against central differences. Ends with a
deliberately corrupted backward pass to show what a failure looks like.

Run:  python demos/01_autodiff_and_gradcheck.py
"""

import numpy as np

from cleer import tensor as T
from cleer.gradcheck import grad_check
from cleer.tensor import DiffTensor, _accum, _node

rng = np.random.default_rng(0)

# A tiny computation: dilated conv -> relu -> max-pool -> mean
x = DiffTensor(rng.standard_normal((2, 3, 12)), requires_grad=True)
w = DiffTensor(rng.standard_normal((4, 3, 3)), requires_grad=True)

y = T.mean(T.maxpool1d(T.relu(T.conv1d_dilated(x, w, dilation=2))))
y.backward()
print("loss:", float(y.data))
print("dL/dx has shape", x.grad.shape, "and mean |g| =",
      float(np.abs(x.grad).mean()))

# The same computation under the checker
report = grad_check(
    lambda x, w: T.mean(T.maxpool1d(T.relu(T.conv1d_dilated(x, w, dilation=2)))),
    [DiffTensor(x.data.copy()), DiffTensor(w.data.copy())])
print("conv/relu/pool closure:", report)

# Softmax + cross-entropy, checked end to end
logits = DiffTensor(rng.standard_normal((4, 3)))
labels = np.array([0, 2, 1, 1])
report = grad_check(lambda l: T.cross_entropy(T.softmax(l), labels), [logits])
print("softmax + cross-entropy:", report)


# What a broken backward looks like: forward computes 3x, backward claims 6x
def dishonest_triple(t):
    out_data = t.data * 3.0

    def backward(g):
        _accum(t, g * 6.0)

    return _node(out_data, (t,), backward)


bad = grad_check(lambda t: dishonest_triple(t).sum(),
                 [DiffTensor(rng.standard_normal(5))])
print("corrupted backward:", bad)
assert not bad.passed
