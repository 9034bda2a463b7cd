"""Reverse-mode differentiable tensor kernels on top of numpy.

A DiffTensor wraps a float numpy array and records the operations applied to
it. Calling ``backward()`` on a scalar result populates ``.grad`` on every
tensor with ``requires_grad=True`` that participated in the computation.

Kernels are vectorized: convolutions are lowered to a single GEMM per call
(im2col), pooling and reductions are pure numpy. Heavy math therefore runs
in BLAS regardless of graph size. dtype follows the input arrays; float32 is
fine for training, gradient checks must be run in float64.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ContractError, EmptyInputError, ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)

_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class DiffTensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return (f"DiffTensor(shape={self.data.shape}, dtype={self.data.dtype},"
                f" requires_grad={self.requires_grad})")

    def backward(self):
        """Backpropagate from a scalar. Populates .grad on every
        requires_grad tensor reachable in the graph."""
        if self.data.size != 1:
            raise ContractError(
                f"backward() requires a scalar, got shape {self.data.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return add(self, _wrap(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_wrap(other, self.dtype), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other, self.dtype), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, _wrap(other, self.dtype))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return mul(self, 1.0 / other)
        return mul(self, power(_wrap(other, self.dtype), -1.0))

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, _wrap(other, self.dtype))

    def __getitem__(self, key):
        return _getitem(self, key)

    # -- shape/elementwise helpers as methods -------------------------------

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        if not axes:
            raise ConfigError("transpose() requires an explicit axis order")
        return transpose(self, axes if len(axes) > 1 else axes[0])

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def max(self, axis=None, keepdims=False):
        return max_(self, axis=axis, keepdims=keepdims)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def relu(self):
        return relu(self)


def _wrap(value, dtype):
    if isinstance(value, DiffTensor):
        return value
    return DiffTensor(np.asarray(value, dtype=dtype))


def _node(data, parents, backward):
    """Create a graph node; records parents only while grads are enabled."""
    out = DiffTensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accum(tensor, g):
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.zeros_like(tensor.data)
    tensor.grad += g


def _unbroadcast(g, shape):
    """Reduce gradient g down to the given (broadcast-source) shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# -- elementwise ops ---------------------------------------------------------

def add(a, b):
    out_data = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), backward)


def mul(a, b):
    b = _wrap(b, a.dtype)
    a_data, b_data = a.data, b.data
    out_data = a_data * b_data

    def backward(g):
        _accum(a, _unbroadcast(g * b_data, a_data.shape))
        _accum(b, _unbroadcast(g * a_data, b_data.shape))

    return _node(out_data, (a, b), backward)


def power(a, exponent):
    if not isinstance(exponent, (int, float)):
        raise ConfigError("power() supports scalar exponents only")
    a_data = a.data
    out_data = a_data ** exponent

    def backward(g):
        _accum(a, g * (exponent * a_data ** (exponent - 1)))

    return _node(out_data, (a,), backward)


def exp(a):
    out_data = np.exp(a.data)

    def backward(g):
        _accum(a, g * out_data)

    return _node(out_data, (a,), backward)


def log(a):
    a_data = a.data
    out_data = np.log(a_data)

    def backward(g):
        _accum(a, g / a_data)

    return _node(out_data, (a,), backward)


def relu(a):
    a_data = a.data
    out_data = np.maximum(a_data, 0)

    def backward(g):
        _accum(a, g * (a_data > 0))

    return _node(out_data, (a,), backward)


def masked_fill(a, mask, value):
    """Replace entries where mask is True with a constant; gradient flows
    only through the untouched entries."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.data.shape:
        raise ShapeError(
            f"masked_fill: mask shape {mask.shape} != tensor shape {a.data.shape}")
    out_data = np.where(mask, np.asarray(value, dtype=a.dtype), a.data)

    def backward(g):
        _accum(a, np.where(mask, 0, g))

    return _node(out_data, (a,), backward)


# -- shape ops ----------------------------------------------------------------

def reshape(a, shape):
    old_shape = a.data.shape
    out_data = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(old_shape))

    return _node(out_data, (a,), backward)


def transpose(a, axes):
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out_data = np.ascontiguousarray(a.data.transpose(axes))

    def backward(g):
        _accum(a, g.transpose(inverse))

    return _node(out_data, (a,), backward)


def _getitem(a, key):
    out_data = a.data[key]

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[key] += g
        _accum(a, ga)

    return _node(out_data, (a,), backward)


def concatenate(tensors, axis):
    tensors = list(tensors)
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accum(t, piece)

    return _node(out_data, tuple(tensors), backward)


# -- reductions ----------------------------------------------------------------

def _restore_axes(g, axis, keepdims, ndim):
    if keepdims or axis is None:
        return g
    axes = axis if isinstance(axis, tuple) else (axis,)
    axes = tuple(ax % ndim for ax in axes)
    for ax in sorted(axes):
        g = np.expand_dims(g, ax)
    return g


def sum_(a, axis=None, keepdims=False):
    in_shape = a.data.shape
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        g = _restore_axes(np.asarray(g), axis, keepdims, len(in_shape))
        _accum(a, np.broadcast_to(g, in_shape))

    return _node(out_data, (a,), backward)


def mean(a, axis=None, keepdims=False):
    in_shape = a.data.shape
    out_data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size // max(1, out_data.size)

    def backward(g):
        g = _restore_axes(np.asarray(g), axis, keepdims, len(in_shape))
        _accum(a, np.broadcast_to(g, in_shape) / count)

    return _node(out_data, (a,), backward)


def max_(a, axis=None, keepdims=False):
    """Max reduction routing gradient to the first (lowest-index) argmax."""
    a_data = a.data
    if axis is None:
        flat_idx = int(np.argmax(a_data))
        out_data = a_data.reshape(-1)[flat_idx]

        def backward(g):
            ga = np.zeros_like(a_data)
            ga.reshape(-1)[flat_idx] = g
            _accum(a, ga)

        return _node(out_data, (a,), backward)

    idx = np.expand_dims(np.argmax(a_data, axis=axis), axis)
    picked = np.take_along_axis(a_data, idx, axis=axis)
    out_data = picked if keepdims else np.squeeze(picked, axis=axis)

    def backward(g):
        g = g if keepdims else np.expand_dims(g, axis)
        ga = np.zeros_like(a_data)
        np.put_along_axis(ga, idx, g, axis=axis)
        _accum(a, ga)

    return _node(out_data, (a,), backward)


# -- linear algebra -------------------------------------------------------------

def matmul(a, b):
    """Matrix product; supports equal leading batch dimensions."""
    a_data, b_data = a.data, b.data
    if a_data.shape[-1] != b_data.shape[-2]:
        raise ShapeError(
            f"matmul: inner dimensions disagree, {a_data.shape} @ {b_data.shape}")
    out_data = np.matmul(a_data, b_data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b_data, -1, -2))
        gb = np.matmul(np.swapaxes(a_data, -1, -2), g)
        _accum(a, _unbroadcast(ga, a_data.shape))
        _accum(b, _unbroadcast(gb, b_data.shape))

    return _node(out_data, (a, b), backward)


def linear(x, weight, bias):
    """y = x @ W + b applied over the last axis of x."""
    x_data, w_data, b_data = x.data, weight.data, bias.data
    if x_data.shape[-1] != w_data.shape[0]:
        raise ShapeError(
            f"linear: input shape {x_data.shape} incompatible with weight"
            f" shape {w_data.shape}")
    if b_data.shape != (w_data.shape[1],):
        raise ShapeError(
            f"linear: bias shape {b_data.shape} incompatible with weight"
            f" shape {w_data.shape}")
    lead = x_data.shape[:-1]
    x2 = x_data.reshape(-1, x_data.shape[-1])
    out_data = (x2 @ w_data + b_data).reshape(lead + (w_data.shape[1],))

    def backward(g):
        g2 = g.reshape(-1, w_data.shape[1])
        _accum(x, (g2 @ w_data.T).reshape(x_data.shape))
        _accum(weight, x2.T @ g2)
        _accum(bias, g2.sum(axis=0))

    return _node(out_data, (x, weight, bias), backward)


def conv1d_dilated(x, kernel, dilation=1, padding="same"):
    """Dilated 1D convolution with zero 'same' padding.

    x: (B, C_in, L), kernel: (C_out, C_in, K) with K odd. Output (B, C_out, L).
    Lowered to one GEMM over an im2col buffer.
    """
    if padding != "same":
        raise ConfigError(f"conv1d_dilated: unsupported padding {padding!r}")
    if not isinstance(dilation, (int, np.integer)) or dilation < 1:
        raise ConfigError(f"conv1d_dilated: dilation must be >= 1, got {dilation}")
    x_data, w_data = x.data, kernel.data
    if x_data.ndim != 3 or w_data.ndim != 3:
        raise ShapeError(
            f"conv1d_dilated: expected 3-d input and kernel, got {x_data.shape}"
            f" and {w_data.shape}")
    B, c_in, L = x_data.shape
    c_out, c_in_k, K = w_data.shape
    if K % 2 == 0:
        raise ConfigError(f"conv1d_dilated: kernel size must be odd, got {K}")
    if c_in != c_in_k:
        raise ShapeError(
            f"conv1d_dilated: input channels {x_data.shape} do not match"
            f" kernel {w_data.shape}")

    pad = dilation * (K // 2)
    xp = np.pad(x_data, ((0, 0), (0, 0), (pad, pad)))
    cols = np.empty((K, c_in, B * L), dtype=x_data.dtype)
    for k in range(K):
        sl = xp[:, :, k * dilation:k * dilation + L]        # (B, C_in, L)
        cols[k] = sl.transpose(1, 0, 2).reshape(c_in, B * L)
    cols2 = cols.reshape(K * c_in, B * L)
    w2 = w_data.transpose(0, 2, 1).reshape(c_out, K * c_in)  # (C_out, K*C_in)
    y2 = w2 @ cols2
    out_data = np.ascontiguousarray(
        y2.reshape(c_out, B, L).transpose(1, 0, 2))

    def backward(g):
        g2 = np.ascontiguousarray(g.transpose(1, 0, 2)).reshape(c_out, B * L)
        gw = (g2 @ cols2.T).reshape(c_out, K, c_in).transpose(0, 2, 1)
        _accum(kernel, gw)
        if x.requires_grad:
            gcols = (w2.T @ g2).reshape(K, c_in, B, L)
            gxp = np.zeros_like(xp)
            for k in range(K):
                gxp[:, :, k * dilation:k * dilation + L] += \
                    gcols[k].transpose(1, 0, 2)
            _accum(x, gxp[:, :, pad:pad + L])

    return _node(out_data, (x, kernel), backward)


def maxpool1d(x, kernel=2, stride=2):
    """Halving max-pool over the last axis, ceil semantics: an odd tail
    element passes through. Gradient routes to the argmax (ties: lowest
    index)."""
    if kernel != 2 or stride != 2:
        raise ConfigError("maxpool1d implements kernel=2, stride=2 only")
    x_data = x.data
    L = x_data.shape[-1]
    if L == 0:
        raise EmptyInputError("maxpool1d: empty input (L=0)")
    npairs = L // 2
    first = x_data[..., 0:2 * npairs:2]
    second = x_data[..., 1:2 * npairs:2]
    take_second = second > first          # strict: ties go to the lower index
    pooled = np.where(take_second, second, first)
    if L % 2:
        out_data = np.concatenate([pooled, x_data[..., -1:]], axis=-1)
    else:
        out_data = pooled

    def backward(g):
        gx = np.zeros_like(x_data)
        gp = g[..., :npairs]
        gx[..., 0:2 * npairs:2] = np.where(take_second, 0, gp)
        gx[..., 1:2 * npairs:2] = np.where(take_second, gp, 0)
        if L % 2:
            gx[..., -1] = g[..., -1]
        _accum(x, gx)

    return _node(out_data, (x,), backward)


# -- softmax / losses -----------------------------------------------------------

def logsumexp(a, axis=-1):
    """Stable log-sum-exp along one axis. -inf entries contribute zero."""
    a_data = a.data
    m = np.max(a_data, axis=axis, keepdims=True)
    expd = np.exp(a_data - m)
    s = expd.sum(axis=axis, keepdims=True)
    out_keep = m + np.log(s)
    out_data = np.squeeze(out_keep, axis=axis)
    soft = expd / s

    def backward(g):
        _accum(a, np.expand_dims(g, axis) * soft)

    return _node(out_data, (a,), backward)


def softmax(a, axis=-1):
    """Stable softmax; rows along `axis` sum to 1."""
    a_data = a.data
    m = np.max(a_data, axis=axis, keepdims=True)
    expd = np.exp(a_data - m)
    s_data = expd / expd.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * s_data).sum(axis=axis, keepdims=True)
        _accum(a, s_data * (g - inner))

    return _node(s_data, (a,), backward)


_LOG_FLOOR = 1e-300  # keeps log() finite if a class probability underflows


def cross_entropy(probs, labels):
    """Mean negative log probability of the true class.

    probs: (B, K) rows from softmax; labels: int array (B,) in [0, K).
    """
    p_data = probs.data
    if p_data.ndim != 2:
        raise ShapeError(f"cross_entropy: expected (B, K) probs, got {p_data.shape}")
    labels = np.asarray(labels)
    B, K = p_data.shape
    if labels.shape != (B,):
        raise ShapeError(
            f"cross_entropy: labels shape {labels.shape} does not match batch {B}")
    if labels.min() < 0 or labels.max() >= K:
        raise IndexError(
            f"cross_entropy: label out of range [0, {K}): "
            f"min={labels.min()}, max={labels.max()}")
    rows = np.arange(B)
    p_true = np.maximum(p_data[rows, labels], _LOG_FLOOR)
    out_data = -np.log(p_true).mean()

    def backward(g):
        gp = np.zeros_like(p_data)
        gp[rows, labels] = -g / (B * p_true)
        _accum(probs, gp)

    return _node(out_data, (probs,), backward)
