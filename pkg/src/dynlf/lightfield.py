"""Light-field data model.

Images are ``(H, W, C)`` float arrays with intensities in ``[0, 1]``; disparity
maps are ``(H, W)`` float arrays measured in pixels of horizontal shift per
unit angular step.  The pixel ``(x, y)`` of view ``t`` with disparity ``d``
corresponds to ``(x + d * (s - t), y)`` in view ``s``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def as_image(img) -> np.ndarray:
    """Return ``img`` as an ``(H, W, C)`` array, adding a channel axis to 2-D input."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected an (H, W, 1|3) image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("image dimensions must be positive")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return arr


def to_luma(img) -> np.ndarray:
    """BT.601 luma of an RGB image, as a single-channel ``(H, W, 1)`` image.

    Single-channel input is returned unchanged.
    """
    arr = as_image(img)
    if arr.shape[2] == 1:
        return arr
    y = arr.astype(np.float64) @ LUMA_WEIGHTS
    return np.clip(y, 0.0, 1.0)[:, :, None]


@dataclass
class LightField:
    """A stack of views sampled along a horizontal line.

    ``views`` has shape ``(U, H, W, C)`` and is stored as float32, which is also
    the precision of the on-disk container.  ``disparities``, when present, has
    shape ``(U, H, W)`` and holds a ground-truth or estimated map per view.
    """

    views: np.ndarray
    disparities: np.ndarray | None = None
    dmax: float | None = None
    indices: list[int] = field(default_factory=list)

    def __post_init__(self):
        views = np.asarray(self.views)
        if views.ndim == 3:
            views = views[..., None]
        if views.ndim != 4 or views.shape[-1] not in (1, 3):
            raise ValueError(f"views must have shape (U, H, W, 1|3), got {views.shape}")
        if not np.all(np.isfinite(views)):
            raise ValueError("views contain non-finite values")
        self.views = np.clip(views, 0.0, 1.0).astype(np.float32)
        if self.disparities is not None:
            disp = np.asarray(self.disparities, dtype=np.float32)
            if disp.shape != views.shape[:3]:
                raise ValueError(
                    f"disparities shape {disp.shape} does not match views {views.shape[:3]}")
            if not np.all(np.isfinite(disp)):
                raise ValueError("disparities contain non-finite values")
            self.disparities = disp
        if not self.indices:
            self.indices = list(range(views.shape[0]))
        if len(self.indices) != views.shape[0]:
            raise ValueError("one angular index is required per view")

    @property
    def U(self) -> int:
        return self.views.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        """``(H, W, C)`` of every view."""
        return self.views.shape[1:]

    def view(self, u: int) -> np.ndarray:
        return self.views[u]

    def disparity(self, u: int) -> np.ndarray:
        if self.disparities is None:
            raise ValueError("light field carries no disparity maps")
        return self.disparities[u]


@dataclass
class SparseInput:
    """The two source views (and their disparities) a reconstruction starts from."""

    indices: tuple[int, int]
    views: tuple[np.ndarray, np.ndarray]
    disparities: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        if len(self.indices) != 2:
            raise ValueError("exactly two source views are supported")
        s1, s2 = self.indices
        if not s1 < s2:
            raise ValueError(f"source indices must be increasing, got {self.indices}")
        self.views = tuple(as_image(v).astype(np.float64) for v in self.views)
        self.disparities = tuple(np.asarray(d, dtype=np.float64) for d in self.disparities)
        for v, d in zip(self.views, self.disparities):
            if d.shape != v.shape[:2]:
                raise ValueError(f"disparity shape {d.shape} does not match view {v.shape[:2]}")

    @classmethod
    def from_lightfield(cls, lf: LightField, sources=(0, -1), disparities=None):
        """Pick two views of ``lf``; disparities default to the ones the LF carries."""
        s1, s2 = (s % lf.U for s in sources)
        if disparities is None:
            disparities = (lf.disparity(s1), lf.disparity(s2))
        return cls((s1, s2), (lf.view(s1), lf.view(s2)), tuple(disparities))

    @property
    def shape(self):
        return self.views[0].shape


def shear(lf: LightField, k: int) -> LightField:
    """Shift view ``u`` by ``k * (u - u_mid)`` pixels so every disparity drops by ``k``.

    Only the columns that all views still cover are kept, so the result is
    ``k * (index span)`` pixels narrower.  ``u_mid`` is the middle index.
    """
    idx = np.asarray(lf.indices)
    shifts = k * (idx - idx[len(idx) // 2])
    off = shifts - shifts.min()
    W = lf.shape[1] - int(shifts.max() - shifts.min())
    if W < 1:
        raise ValueError(f"a shear of {k} leaves no columns")
    views = np.stack([v[:, o:o + W] for v, o in zip(lf.views, off)])
    disp = None
    if lf.disparities is not None:
        disp = np.stack([d[:, o:o + W] for d, o in zip(lf.disparities, off)]) - np.float32(k)
    return LightField(views, disp, lf.dmax, list(lf.indices))


def extract_epi(lf: LightField, y: int) -> np.ndarray:
    """Epipolar plane image at row ``y``: shape ``(U, W, C)``."""
    H = lf.shape[0]
    if not 0 <= y < H:
        raise IndexError(f"row {y} outside [0, {H})")
    return lf.views[:, y, :, :].copy()
