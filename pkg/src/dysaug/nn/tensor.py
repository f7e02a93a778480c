"""A small numpy tensor with reverse-mode automatic differentiation.

Only the operations the two GAN architectures need are provided. Gradients are
accumulated into leaf tensors created with ``requires_grad=True``.
"""
from __future__ import annotations

import numpy as np

from .. import _kernels
from ..errors import DetachedGraph, NotScalar, ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None, _parents=(), _backward=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

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
    def is_leaf(self):
        return not self._parents

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_not_scalar(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # arithmetic --------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other, self.dtype)))

    def __rsub__(self, other):
        return add(as_tensor(other, self.dtype), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return tsum(self)

    def mean(self):
        return tmean(self)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)

    # autodiff ----------------------------------------------------------
    def backward(self):
        """Accumulate d(self)/d(leaf) into every tracked leaf reachable from this scalar."""
        if self.data.size != 1:
            raise NotScalar(f"backward needs a scalar, got shape {self.shape}")
        if not self.requires_grad:
            raise DetachedGraph("loss does not depend on any tracked tensor")

        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg


def _raise_not_scalar(t):
    raise NotScalar(f"item() needs a single element, got shape {t.shape}")


def as_tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def _node(data, parents, backward):
    parents = tuple(parents)
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=parents if req else (),
                  _backward=backward if req else None)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise and reductions ---------------------------------------------

def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def neg(a) -> Tensor:
    return _node(-a.data, (a,), lambda g: (-g,))


def tsum(a) -> Tensor:
    return _node(np.asarray(a.data.sum(), dtype=a.dtype), (a,),
                 lambda g: (np.broadcast_to(g, a.shape).astype(a.dtype),))


def tmean(a) -> Tensor:
    n = a.data.size
    return _node(np.asarray(a.data.mean(), dtype=a.dtype), (a,),
                 lambda g: (np.full(a.shape, g / n, dtype=a.dtype),))


def matmul(a, b) -> Tensor:
    return _node(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def reshape(a, shape) -> Tensor:
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors, axis=1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _node(np.concatenate([t.data for t in tensors], axis=axis), tensors,
                 lambda g: tuple(np.split(g, sizes, axis=axis)))


# activations --------------------------------------------------------------

def relu(x) -> Tensor:
    mask = x.data > 0
    return _node(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def leaky_relu(x, slope) -> Tensor:
    scale = np.where(x.data > 0, 1.0, slope).astype(x.dtype)
    return _node(x.data * scale, (x,), lambda g: (g * scale,))


def tanh(x) -> Tensor:
    y = np.tanh(x.data)
    return _node(y, (x,), lambda g: (g * (1 - y * y),))


def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x) -> Tensor:
    y = _sigmoid(x.data)
    return _node(y, (x,), lambda g: (g * y * (1 - y),))


def log_sigmoid(x) -> Tensor:
    """log(sigmoid(x)), stable for large |x|."""
    y = -np.logaddexp(0, -x.data).astype(x.dtype)
    return _node(y, (x,), lambda g: (g * _sigmoid(-x.data),))


def bce_with_logits(logits, targets) -> Tensor:
    """Mean binary cross-entropy between ``sigmoid(logits)`` and ``targets`` in [0, 1]."""
    t = np.asarray(targets, dtype=logits.dtype)
    t = np.broadcast_to(t, logits.shape)
    ll = add(mul(log_sigmoid(logits), t), mul(log_sigmoid(neg(logits)), 1 - t))
    return neg(tmean(ll))


# layers -------------------------------------------------------------------

def linear(x, w, b) -> Tensor:
    """``x @ w.T + b`` with ``w`` of shape (out, in)."""
    if x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"fc expects (batch, {w.shape[1]}), got {x.shape}")
    out = x.data @ w.data.T + b.data
    return _node(out, (x, w, b), lambda g: (g @ w.data, g.T @ x.data, g.sum(axis=0)))


def conv2d(x, w, b, stride=(1, 1)) -> Tensor:
    """Unpadded strided convolution, NCHW input and (out, in, kh, kw) weights."""
    if x.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"conv2d expects (batch, {w.shape[1]}, H, W), got {x.shape}")
    if x.shape[2] < w.shape[2] or x.shape[3] < w.shape[3]:
        raise ShapeMismatch(f"input {x.shape[2:]} smaller than kernel {w.shape[2:]}")
    sh, sw = stride
    dtype = x.dtype
    xd = np.ascontiguousarray(x.data)
    wd = np.ascontiguousarray(w.data, dtype=dtype)
    out = _kernels.conv2d_forward(xd, wd, np.ascontiguousarray(b.data, dtype=dtype), sh, sw)

    def backward(g):
        gx, gw, gb = _kernels.conv2d_backward(xd, wd, np.ascontiguousarray(g, dtype=dtype), sh, sw)
        return gx, gw, gb

    return _node(out, (x, w, b), backward)


def replicate_pad(x, margins) -> Tensor:
    """Pad H and W by repeating edge values; margins are (top, bottom, left, right)."""
    top, bottom, left, right = margins
    H, W = x.shape[2], x.shape[3]
    out = np.pad(x.data, ((0, 0), (0, 0), (top, bottom), (left, right)), mode="edge")

    def backward(g):
        # fold padded rows/cols back onto the edge they copied
        g = g.copy()
        g[:, :, top, :] += g[:, :, :top, :].sum(axis=2)
        g[:, :, top + H - 1, :] += g[:, :, top + H:, :].sum(axis=2)
        g = g[:, :, top:top + H, :]
        g[:, :, :, left] += g[:, :, :, :left].sum(axis=3)
        g[:, :, :, left + W - 1] += g[:, :, :, left + W:].sum(axis=3)
        return (np.ascontiguousarray(g[:, :, :, left:left + W]),)

    return _node(out, (x,), backward)


def flatten(x) -> Tensor:
    return reshape(x, (x.shape[0], -1))
