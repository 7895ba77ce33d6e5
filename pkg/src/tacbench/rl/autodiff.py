"""Reverse-mode automatic differentiation on numpy arrays.

A Tensor records the operations that produced it on an implicit tape (the
parent graph); backward() topologically sorts that graph and accumulates
gradients.  Broadcasting follows numpy semantics, with gradients summed
back down to each operand's shape.
"""

from __future__ import annotations

import numpy as np


def _sum_to_shape(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """numpy array with gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100    # beat ndarray operator dispatch

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction
    @classmethod
    def _op(cls, data, parents, backward):
        out = cls(data)
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @staticmethod
    def _lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    def _accum(self, grad):
        grad = _sum_to_shape(np.asarray(grad, dtype=np.float64), self.data.shape)
        self.grad = grad if self.grad is None else self.grad + grad

    # -- arithmetic
    def __add__(self, other):
        other = self._lift(other)
        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(g)
            if b.requires_grad:
                b._accum(g)
        return self._op(self.data + other.data, (self, other), bw)

    __radd__ = __add__

    def __mul__(self, other):
        other = self._lift(other)
        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(g * b.data)
            if b.requires_grad:
                b._accum(g * a.data)
        return self._op(self.data * other.data, (self, other), bw)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __truediv__(self, other):
        other = self._lift(other)
        return self * other ** -1.0

    def __rtruediv__(self, other):
        return self._lift(other) * self ** -1.0

    def __pow__(self, p: float):
        if not np.isscalar(p):
            raise TypeError("only scalar exponents are supported")
        def bw(g, a=self):
            if a.requires_grad:
                a._accum(g * p * a.data ** (p - 1.0))
        return self._op(self.data ** p, (self,), bw)

    def __matmul__(self, other):
        other = self._lift(other)
        def bw(g, a=self, b=other):
            if a.requires_grad:
                a._accum(g @ b.data.T)
            if b.requires_grad:
                b._accum(a.data.T @ g)
        return self._op(self.data @ other.data, (self, other), bw)

    # -- elementwise nonlinearities
    def tanh(self):
        y = np.tanh(self.data)
        def bw(g, a=self, y=y):
            if a.requires_grad:
                a._accum(g * (1.0 - y * y))
        return self._op(y, (self,), bw)

    def relu(self):
        def bw(g, a=self):
            if a.requires_grad:
                a._accum(g * (a.data > 0))
        return self._op(np.maximum(self.data, 0.0), (self,), bw)

    def exp(self):
        y = np.exp(self.data)
        def bw(g, a=self, y=y):
            if a.requires_grad:
                a._accum(g * y)
        return self._op(y, (self,), bw)

    def log(self):
        def bw(g, a=self):
            if a.requires_grad:
                a._accum(g / a.data)
        return self._op(np.log(self.data), (self,), bw)

    def maximum(self, other):
        other = self._lift(other)
        mask = self.data >= other.data
        def bw(g, a=self, b=other, mask=mask):
            if a.requires_grad:
                a._accum(g * mask)
            if b.requires_grad:
                b._accum(g * ~mask)
        return self._op(np.maximum(self.data, other.data), (self, other), bw)

    def minimum(self, other):
        other = self._lift(other)
        mask = self.data <= other.data
        def bw(g, a=self, b=other, mask=mask):
            if a.requires_grad:
                a._accum(g * mask)
            if b.requires_grad:
                b._accum(g * ~mask)
        return self._op(np.minimum(self.data, other.data), (self, other), bw)

    # -- reductions and shape ops
    def sum(self, axis=None, keepdims: bool = False):
        def bw(g, a=self):
            if not a.requires_grad:
                return
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accum(np.broadcast_to(g, a.data.shape))
        return self._op(self.data.sum(axis=axis, keepdims=keepdims), (self,), bw)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        def bw(g, a=self):
            if a.requires_grad:
                a._accum(np.asarray(g).reshape(a.data.shape))
        return self._op(self.data.reshape(shape), (self,), bw)

    def transpose(self, *axes):
        axes = axes or None
        def bw(g, a=self, axes=axes):
            inv = np.argsort(axes) if axes else None
            a._accum(np.transpose(g, inv))
        return self._op(np.transpose(self.data, axes), (self,), bw)

    @staticmethod
    def concat(tensors, axis: int = 0) -> "Tensor":
        tensors = [Tensor._lift(t) for t in tensors]
        sizes = [t.data.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]
        def bw(g, ts=tensors, splits=splits):
            for t, piece in zip(ts, np.split(np.asarray(g), splits, axis=axis)):
                if t.requires_grad:
                    t._accum(piece)
        data = np.concatenate([t.data for t in tensors], axis=axis)
        return Tensor._op(data, tensors, bw)

    # -- convolution (NCHW, stride s, valid padding) via im2col
    def conv2d(self, weight: "Tensor", bias: "Tensor" = None, stride: int = 1):
        w = self._lift(weight)
        x = self.data
        n, cin, h, wd = x.shape
        cout, cin_w, kh, kw = w.data.shape
        if cin != cin_w:
            raise ValueError(f"input channels {cin} != weight channels {cin_w}")
        oh = (h - kh) // stride + 1
        ow = (wd - kw) // stride + 1

        sN, sC, sH, sW = x.strides
        cols = np.lib.stride_tricks.as_strided(
            x, (n, cin, kh, kw, oh, ow),
            (sN, sC, sH, sW, sH * stride, sW * stride), writeable=False)
        cols2 = cols.reshape(n, cin * kh * kw, oh * ow)
        wmat = w.data.reshape(cout, cin * kh * kw)
        out = np.einsum("ok,nkp->nop", wmat, cols2).reshape(n, cout, oh, ow)

        def bw(g, a=self, w=w, cols2=cols2, wmat=wmat):
            g2 = np.asarray(g).reshape(n, cout, oh * ow)
            if w.requires_grad:
                gw = np.einsum("nop,nkp->ok", g2, cols2)
                w._accum(gw.reshape(w.data.shape))
            if a.requires_grad:
                gcols = np.einsum("ok,nop->nkp", wmat, g2)
                gx = np.zeros_like(a.data)
                gcols = gcols.reshape(n, cin, kh, kw, oh, ow)
                for i in range(kh):
                    for j in range(kw):
                        gx[:, :, i:i + oh * stride:stride,
                           j:j + ow * stride:stride] += gcols[:, :, i, j]
                a._accum(gx)

        out_t = self._op(out, (self, w), bw)
        if bias is not None:
            out_t = out_t + self._lift(bias).reshape(1, cout, 1, 1)
        return out_t

    # -- backward pass
    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        order, seen = [], set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(order):
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)

    def zero_grad(self):
        self.grad = None
