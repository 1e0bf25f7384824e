"""Geometry-guided patch refinement of a blended novel view.

The blended view is cut into overlapping patches.  Each patch is matched to
an axis-aligned patch of every source view, displaced by the mean target
disparity inside the patch, and a residual CNN looks at all of them together.
Overlapping residuals are averaged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ArchConfig, RefineConfig
from .nn import Tensor, ops
from .nn.layers import resnet
from .warp import round_half_away


def _origins(n: int, size: int, stride: int) -> list[int]:
    size = min(size, n)
    # a stride longer than the patch would leave gaps
    out = list(range(0, n - size + 1, min(stride, size)))
    if out[-1] != n - size:
        out.append(n - size)
    return out


@dataclass
class PatchGrid:
    height: int
    width: int
    patch_size: int
    stride: int

    @property
    def size(self) -> tuple[int, int]:
        return min(self.patch_size, self.height), min(self.patch_size, self.width)

    def origins(self) -> list[tuple[int, int]]:
        ys = _origins(self.height, self.patch_size, self.stride)
        xs = _origins(self.width, self.patch_size, self.stride)
        return [(y, x) for y in ys for x in xs]

    def counts(self) -> np.ndarray:
        ph, pw = self.size
        c = np.zeros((self.height, self.width))
        for y, x in self.origins():
            c[y:y + ph, x:x + pw] += 1
        return c


def patch_disparity(disparity, y0: int, y1: int, x0: int, x1: int) -> float:
    """Mean disparity inside a patch."""
    block = np.asarray(disparity, dtype=np.float64)[y0:y1, x0:x1]
    if block.size == 0:
        raise ValueError("empty patch")
    return float(block.mean())


def locate_patch(center_t: float, d_patch: float, s: int, t: int, W: int, P: int) -> int:
    """Centre column of the matching source patch, kept inside the image."""
    half = P // 2
    c = int(round_half_away(center_t + d_patch * (s - t)))
    return int(np.clip(c, half, W - P + half))


def patch_residual(target, sources, params, arch: ArchConfig) -> Tensor:
    """Residual ``(h, w, C)`` predicted from the target patch and its source patches."""
    target = target if isinstance(target, Tensor) else Tensor(np.asarray(target, float))
    h, w, C = target.shape
    srcs = [Tensor(np.asarray(p, dtype=np.float64)) for p in sources]
    for p in srcs:
        if p.shape != target.shape:
            raise ValueError(f"source patch {p.shape} != target patch {target.shape}")
    x = ops.transpose(ops.concat([target, *srcs], axis=2), (2, 0, 1))
    r = resnet(params, "fr", x, arch.res_blocks, arch.slope)
    return ops.transpose(r, (1, 2, 0))


def refine_patch(target, sources, params, arch: ArchConfig) -> Tensor:
    target = target if isinstance(target, Tensor) else Tensor(np.asarray(target, float))
    return ops.add(target, patch_residual(target, sources, params, arch))


def merge_patches(patches, grid: PatchGrid, channels: int) -> np.ndarray:
    """Average overlapping patches (listed in ``grid.origins()`` order)."""
    ph, pw = grid.size
    acc = np.zeros((grid.height, grid.width, channels))
    for (y, x), p in zip(grid.origins(), patches):
        acc[y:y + ph, x:x + pw] += np.asarray(p).reshape(ph, pw, channels)
    return acc / grid.counts()[:, :, None]


def refine_image(blended, source_images, source_indices, t: int, disparity_t, params,
                 arch: ArchConfig, cfg: RefineConfig, origin=(0, 0)) -> Tensor:
    """Refine ``blended`` (a region of view ``t`` starting at ``origin``).

    ``source_images`` and ``disparity_t`` cover the full frame.  The result is
    ``blended`` plus the overlap-averaged patch residuals, so a zero residual
    network returns ``blended`` unchanged.
    """
    blended = blended if isinstance(blended, Tensor) else Tensor(np.asarray(blended, float))
    h, w, C = blended.shape
    oy, ox = origin
    W = np.asarray(source_images[0]).shape[1]
    grid = PatchGrid(h, w, cfg.patch_size, cfg.stride)
    ph, pw = grid.size
    total = None
    for y, x in grid.origins():
        gy, gx = oy + y, ox + x
        d_patch = patch_disparity(disparity_t, gy, gy + ph, gx, gx + pw)
        center = gx + pw // 2
        srcs = []
        for img, s in zip(source_images, source_indices):
            cs = locate_patch(center, d_patch, s, t, W, pw)
            sx = cs - pw // 2
            srcs.append(np.asarray(img)[gy:gy + ph, sx:sx + pw])
        target = ops.getitem(blended, (slice(y, y + ph), slice(x, x + pw)))
        r = ops.place(patch_residual(target, srcs, params, arch), (h, w, C), (y, x, 0))
        total = r if total is None else ops.add(total, r)
    inv = (1.0 / grid.counts())[:, :, None]
    return ops.add(blended, ops.mul(total, inv))
