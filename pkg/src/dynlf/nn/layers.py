"""Parameter initialisation and the small networks built from the ops."""
from __future__ import annotations

import numpy as np

from . import ops
from .tensor import Tensor


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def init_mlp(rng, prefix: str, sizes, zero_last: bool = False) -> dict[str, Tensor]:
    """Weights ``{prefix}.{i}.w`` / ``{prefix}.{i}.b`` for a chain of affine layers."""
    params = {}
    n = len(sizes) - 1
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = np.zeros((a, b)) if zero_last and i == n - 1 else he_normal(rng, (a, b), a)
        params[f"{prefix}.{i}.w"] = Tensor(w, True, f"{prefix}.{i}.w")
        params[f"{prefix}.{i}.b"] = Tensor(np.zeros(b), True, f"{prefix}.{i}.b")
    return params


def mlp(params, prefix: str, x, n_layers: int, slope: float = 0.1) -> Tensor:
    """Affine layers with leaky ReLU between them (none after the last)."""
    for i in range(n_layers):
        x = ops.affine(x, params[f"{prefix}.{i}.w"], params[f"{prefix}.{i}.b"])
        if i < n_layers - 1:
            x = ops.leaky_relu(x, slope)
    return x


def _conv(rng, params, name, c_in, c_out, zero=False):
    k = np.zeros((c_out, c_in, 3, 3)) if zero else he_normal(rng, (c_out, c_in, 3, 3), c_in * 9)
    params[f"{name}.w"] = Tensor(k, True, f"{name}.w")
    params[f"{name}.b"] = Tensor(np.zeros(c_out), True, f"{name}.b")


def init_resnet(rng, prefix: str, c_in: int, width: int, c_out: int, blocks: int,
                zero_out: bool = False) -> dict[str, Tensor]:
    """Head conv, ``blocks`` residual blocks, tail conv.

    The second conv of every block starts at zero so each block is initially
    the identity; ``zero_out`` does the same for the tail conv.
    """
    params: dict[str, Tensor] = {}
    _conv(rng, params, f"{prefix}.head", c_in, width)
    for i in range(blocks):
        _conv(rng, params, f"{prefix}.block{i}.conv1", width, width)
        _conv(rng, params, f"{prefix}.block{i}.conv2", width, width, zero=True)
    _conv(rng, params, f"{prefix}.tail", width, c_out, zero=zero_out)
    return params


def residual_block(x, params, name: str, slope: float = 0.1) -> Tensor:
    """``x + conv2(leaky_relu(conv1(x)))``."""
    h = ops.conv3x3(x, params[f"{name}.conv1.w"], params[f"{name}.conv1.b"])
    h = ops.leaky_relu(h, slope)
    h = ops.conv3x3(h, params[f"{name}.conv2.w"], params[f"{name}.conv2.b"])
    if h.shape != x.shape:
        raise ValueError(f"residual branch changed shape {x.shape} -> {h.shape}")
    return ops.add(x, h)


def resnet(params, prefix: str, x, blocks: int, slope: float = 0.1) -> Tensor:
    h = ops.conv3x3(x, params[f"{prefix}.head.w"], params[f"{prefix}.head.b"])
    h = ops.leaky_relu(h, slope)
    for i in range(blocks):
        h = residual_block(h, params, f"{prefix}.block{i}", slope)
    return ops.conv3x3(h, params[f"{prefix}.tail.w"], params[f"{prefix}.tail.b"])
