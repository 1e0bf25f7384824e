"""Fixed-kernel warping along image rows, plus the geometric helpers shared
with the learned pipeline (neighbourhoods, disparity splatting).

All coordinates are clamped to the image (replicate padding).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lightfield import SparseInput, as_image

KEYS_A = -0.5
KERNELS = ("linear", "cubic")


@dataclass
class WarpConfig:
    d_max: float = 2.0
    kernel: str = "linear"

    def __post_init__(self):
        if not self.d_max > 0:
            raise ValueError("d_max must be positive")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def keys_cubic(x):
    """Keys cubic convolution kernel with a = -0.5."""
    a = KEYS_A
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def kernel_taps(x, kernel: str = "linear"):
    """Integer tap positions and weights for sampling at fractional ``x``.

    Returns ``(taps, weights)`` with a trailing tap axis (2 for linear, 4 for
    cubic).  Taps are not clamped here.
    """
    x = np.asarray(x, dtype=np.float64)
    x0 = np.floor(x)
    f = (x - x0)[..., None]
    if kernel == "linear":
        offs = np.array([0.0, 1.0])
        w = np.concatenate([1.0 - f, f], axis=-1)
    elif kernel == "cubic":
        offs = np.array([-1.0, 0.0, 1.0, 2.0])
        w = keys_cubic(f - offs)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return (x0[..., None] + offs).astype(np.int64), w


def sample_rows(img, xs, kernel: str = "linear") -> np.ndarray:
    """Sample ``img`` at fractional columns ``xs`` (shape ``(H, W')``), row by row."""
    img = as_image(img).astype(np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    if not np.all(np.isfinite(xs)):
        raise ValueError("sample positions must be finite")
    H, W, _ = img.shape
    if xs.shape[0] != H:
        raise ValueError(f"need one row of sample positions per image row, got {xs.shape}")
    taps, w = kernel_taps(xs, kernel)
    taps = np.clip(taps, 0, W - 1)
    rows = np.arange(H)[:, None, None]
    vals = img[rows, taps]                      # (H, W', T, C)
    return np.einsum("hwt,hwtc->hwc", w, vals)


def sample_1d(img, x: float, y: int, kernel: str = "linear") -> np.ndarray:
    """Colour of ``img`` at fractional column ``x`` of integer row ``y``."""
    img = as_image(img)
    if not math.isfinite(x):
        raise ValueError(f"sample position must be finite, got {x}")
    if not 0 <= y < img.shape[0]:
        raise IndexError(f"row {y} outside image")
    return sample_rows(img[y:y + 1], np.array([[x]]), kernel)[0, 0]


def backward_warp(src, disparity, s: int, t: int, kernel: str = "linear") -> np.ndarray:
    """Pull view ``t`` from view ``s`` using the disparity of view ``t``."""
    src = as_image(src)
    disparity = np.asarray(disparity, dtype=np.float64)
    if disparity.shape != src.shape[:2]:
        raise ValueError(f"disparity shape {disparity.shape} != image shape {src.shape[:2]}")
    if s == t:
        return src.astype(np.float64)
    W = src.shape[1]
    xs = np.arange(W, dtype=np.float64)[None, :] + disparity * (s - t)
    return sample_rows(src, xs, kernel)


def warp_source_to_source(other, disparity_s, s_other: int, s: int,
                          kernel: str = "linear") -> np.ndarray:
    """Warp the other input view onto view ``s`` with ``s``'s own disparity."""
    return backward_warp(other, disparity_s, s_other, s, kernel)


def _splat(disparity_s, s: int, t: int, out: np.ndarray) -> None:
    H, W = disparity_s.shape
    d = np.asarray(disparity_s, dtype=np.float64)
    xt = round_half_away(np.arange(W)[None, :] + d * (t - s)).astype(np.int64)
    ok = (xt >= 0) & (xt < W)
    rows = np.broadcast_to(np.arange(H)[:, None], (H, W))
    np.maximum.at(out, (rows[ok], xt[ok]), d[ok])


def fill_holes(disparity, valid) -> np.ndarray:
    """Fill invalid pixels with the nearest valid pixel of the same row (ties go left)."""
    disparity = np.asarray(disparity, dtype=np.float64)
    H, W = disparity.shape
    idx = np.broadcast_to(np.arange(W), (H, W))
    left = np.maximum.accumulate(np.where(valid, idx, -1), axis=1)
    right = np.minimum.accumulate(np.where(valid, idx, W)[:, ::-1], axis=1)[:, ::-1]
    has_left = left >= 0
    has_right = right < W
    use_left = has_left & (~has_right | (idx - left <= right - idx))
    src = np.where(use_left, left, np.where(has_right, right, 0))
    filled = np.take_along_axis(disparity, src, axis=1)
    empty_row = ~valid.any(axis=1)
    filled[empty_row] = 0.0
    return np.where(valid, disparity, filled)


def forward_warp_disparity(disparity_s, s: int, t: int) -> np.ndarray:
    """Splat a source disparity map to view ``t``.

    Collisions keep the larger disparity (nearer surface); holes take the
    nearest valid value in the row.
    """
    return fuse_target_disparity([(disparity_s, s)], t)


def fuse_target_disparity(sources, t: int) -> np.ndarray:
    """Splat several ``(disparity_s, s)`` pairs into one disparity map for view ``t``."""
    first = np.asarray(sources[0][0])
    out = np.full(first.shape, -np.inf)
    for d, s in sources:
        _splat(np.asarray(d, dtype=np.float64), s, t, out)
    valid = np.isfinite(out)
    return fill_holes(np.where(valid, out, 0.0), valid)


def neighborhood_radius(d_max: float, s: int, t: int) -> int:
    # tolerance keeps products such as 0.7 * 3 from rounding up a step
    return max(0, math.ceil(d_max * abs(s - t) - 1e-9))


@dataclass
class Neighborhood:
    x_t: int
    y_t: int
    coords: np.ndarray

    @property
    def K(self) -> int:
        return len(self.coords)


def neighborhood(x_t: int, y_t: int, s: int, t: int, cfg: WarpConfig, W: int) -> Neighborhood:
    """Source-row pixels that may correspond to target pixel ``(x_t, y_t)``."""
    if not 0 <= x_t < W:
        raise IndexError(f"x_t={x_t} outside [0, {W})")
    r = neighborhood_radius(cfg.d_max, s, t)
    coords = np.clip(np.arange(x_t - r, x_t + r + 1), 0, W - 1)
    return Neighborhood(x_t, y_t, coords)


def neighbor_table(W: int, s: int, t: int, d_max: float) -> np.ndarray:
    """``(W, K)`` table of clamped neighbour columns for every target column."""
    r = neighborhood_radius(d_max, s, t)
    return np.clip(np.arange(W)[:, None] + np.arange(-r, r + 1)[None, :], 0, W - 1)


def target_disparity(inputs: SparseInput, t: int) -> np.ndarray:
    """Disparity estimate for novel view ``t``, splatted from all source maps."""
    return fuse_target_disparity(list(zip(inputs.disparities, inputs.indices)), t)


def baseline_synthesize(inputs: SparseInput, t: int, cfg: WarpConfig,
                        disparity_t=None) -> list[np.ndarray]:
    """One warped estimate of view ``t`` per source view."""
    if disparity_t is None:
        disparity_t = target_disparity(inputs, t)
    return [backward_warp(img, disparity_t, s, t, cfg.kernel)
            for img, s in zip(inputs.views, inputs.indices)]
