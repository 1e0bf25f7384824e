"""Differentiable operations.

Each op computes its result with numpy and hands :func:`record` a closure
mapping the output gradient to one gradient per input.
"""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor, record


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record(a.data + b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record(a.data - b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record(a.data * b.data, (a, b),
                  lambda g: (_unbroadcast(g * b.data, a.shape),
                             _unbroadcast(g * a.data, b.shape)))


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)
    return record(np.asarray(out), (x,), rule)


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis), 1.0 / n)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return record(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    inv = np.argsort(axes)
    return record(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),))


def getitem(x, key) -> Tensor:
    """``x[key]``; repeated integer-array indices accumulate their gradients."""
    x = as_tensor(x)
    parts = key if isinstance(key, tuple) else (key,)
    fancy = any(not isinstance(k, (slice, int, type(None), type(Ellipsis))) for k in parts)

    def rule(g):
        gx = np.zeros_like(x.data)
        if fancy:
            np.add.at(gx, key, g)
        else:
            gx[key] = g
        return (gx,)
    return record(x.data[key], (x,), rule)


def take_rows(x, index) -> Tensor:
    """``x[index]`` for a 2-D ``x`` and an integer array ``index`` of any shape."""
    x = as_tensor(x)
    index = np.asarray(index)

    def rule(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, index.ravel(), g.reshape(-1, x.shape[1]))
        return (gx,)
    return record(x.data[index], (x,), rule)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if len(t.shape) != len(ref) or any(
                a != b for i, (a, b) in enumerate(zip(t.shape, ref)) if i != ax):
            raise ValueError(f"concat: shapes {ref} and {t.shape} differ off axis {axis}")
    sizes = [t.shape[ax] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]

    def rule(g):
        return tuple(np.split(g, cuts, axis=ax))
    return record(np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), rule)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    return concat([reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors], axis)


def leaky_relu(x, slope: float = 0.1) -> Tensor:
    """``max(x, slope * x)``; requires ``0 <= slope <= 1``."""
    x = as_tensor(x)
    # one factor array serves both passes; x * 1.0 and x * slope are exact
    factor = np.where(x.data > 0, 1.0, slope)
    return record(x.data * factor, (x,), lambda g: (g * factor,))


def softmax(x, axis: int = -1) -> Tensor:
    """Softmax with max-subtraction."""
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def rule(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)
    return record(y, (x,), rule)


def abs(x) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    return record(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def l1_mean(a, b) -> Tensor:
    """Mean absolute difference."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"l1_mean: shapes {a.shape} and {b.shape} differ")
    diff = a.data - b.data
    n = diff.size

    def rule(g):
        gd = g * np.sign(diff) / n
        return gd, -gd
    return record(np.asarray(np.abs(diff).mean()), (a, b), rule)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return record(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def _rowwise_matmul(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``x @ w`` whose rows do not depend on how many rows are computed together.

    BLAS switches to matrix-vector kernels (with a different summation
    order) for a single row or a single output column; both cases are
    routed around so per-pixel and full-image evaluation agree bit for bit.
    """
    if w.shape[1] == 1:
        return (x * w[:, 0]).sum(axis=1, keepdims=True)
    if x.shape[0] == 1:
        return (np.concatenate([x, x]) @ w)[:1]
    return x @ w


def affine(x, weight, bias) -> Tensor:
    """``x @ weight + bias`` for ``x`` of shape ``(N, in)``."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ValueError(f"affine: cannot apply {weight.shape} weights to input {x.shape}")
    if bias.shape != (weight.shape[1],):
        raise ValueError(f"affine: bias shape {bias.shape} != ({weight.shape[1]},)")

    def rule(g):
        gx = g @ weight.data.T if x.requires_grad else None
        return gx, x.data.T @ g, g.sum(axis=0)
    return record(_rowwise_matmul(x.data, weight.data) + bias.data, (x, weight, bias), rule)


def _im2col(x: np.ndarray) -> np.ndarray:
    C, H, W = x.shape
    p = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    cols = np.empty((C, 9, H, W))
    for i in range(3):
        for j in range(3):
            cols[:, 3 * i + j] = p[:, i:i + H, j:j + W]
    return cols.reshape(C * 9, H * W)


def _col2im(cols: np.ndarray, shape) -> np.ndarray:
    C, H, W = shape
    cols = cols.reshape(C, 9, H, W)
    p = np.zeros((C, H + 2, W + 2))
    for i in range(3):
        for j in range(3):
            p[:, i:i + H, j:j + W] += cols[:, 3 * i + j]
    return p[:, 1:H + 1, 1:W + 1]


def conv3x3(x, kernel, bias) -> Tensor:
    """3x3 cross-correlation with zero padding; ``x`` is ``(C_in, H, W)``."""
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    if x.ndim != 3:
        raise ValueError(f"conv3x3 expects (C, H, W) input, got {x.shape}")
    co, ci = kernel.shape[:2]
    if kernel.shape != (co, ci, 3, 3) or ci != x.shape[0]:
        raise ValueError(f"conv3x3: kernel {kernel.shape} incompatible with input {x.shape}")
    if bias.shape != (co,):
        raise ValueError(f"conv3x3: bias shape {bias.shape} != ({co},)")
    _, H, W = x.shape
    cols = _im2col(x.data)
    kmat = kernel.data.reshape(co, ci * 9)
    out = (kmat @ cols + bias.data[:, None]).reshape(co, H, W)

    def rule(g):
        g2 = g.reshape(co, H * W)
        gk = (g2 @ cols.T).reshape(kernel.shape)
        gx = _col2im(kmat.T @ g2, x.shape) if x.requires_grad else None
        return gx, gk, g2.sum(axis=1)
    return record(out, (x, kernel, bias), rule)


def place(x, shape, offset) -> Tensor:
    """Zero canvas of ``shape`` with ``x`` written at ``offset`` (inverse of a crop)."""
    x = as_tensor(x)
    key = tuple(slice(o, o + n) for o, n in zip(offset, x.shape))
    out = np.zeros(shape)
    out[key] = x.data
    return record(out, (x,), lambda g: (g[key].copy(),))
