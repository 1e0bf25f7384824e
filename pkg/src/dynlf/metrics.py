"""Luma PSNR / SSIM and per-view metric reports."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .lightfield import as_image, to_luma

PSNR_CAP = 99.0
SSIM_K1, SSIM_K2 = 0.01, 0.03
SSIM_WINDOW, SSIM_SIGMA = 11, 1.5


def _luma_pair(a, b):
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return to_luma(a)[:, :, 0].astype(np.float64), to_luma(b)[:, :, 0].astype(np.float64)


def psnr(a, b, mask=None) -> float:
    """PSNR in dB of the luma channels (peak 1.0), capped at 99 dB.

    ``mask`` optionally restricts the error to the pixels where it is true.
    """
    ya, yb = _luma_pair(a, b)
    err = (ya - yb) ** 2
    if mask is not None:
        err = err[np.asarray(mask, dtype=bool)]
        if err.size == 0:
            return PSNR_CAP
    mse = err.mean()
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(1.0 / mse)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(a, b) -> np.ndarray:
    """Local SSIM at every position where the 11x11 window fits."""
    ya, yb = _luma_pair(a, b)
    if min(ya.shape) < SSIM_WINDOW:
        raise ValueError(f"images smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    w = gaussian_window()

    def filt(x):
        return np.einsum("ijkl,kl->ij", sliding_window_view(x, w.shape), w)

    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    mu_a, mu_b = filt(ya), filt(yb)
    var_a = filt(ya * ya) - mu_a * mu_a
    var_b = filt(yb * yb) - mu_b * mu_b
    cov = filt(ya * yb) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b) -> float:
    return float(ssim_map(a, b).mean())


@dataclass
class MetricReport:
    mode: str
    views: list = field(default_factory=list)

    def add(self, u: int, psnr_db: float | None, ssim_val: float | None, seconds: float):
        self.views.append({"u": int(u), "psnr": psnr_db, "ssim": ssim_val,
                           "seconds": float(seconds)})

    def _avg(self, key):
        vals = [v[key] for v in self.views if v[key] is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def avg_psnr(self):
        return self._avg("psnr")

    @property
    def avg_ssim(self):
        return self._avg("ssim")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "views": self.views,
                "avgPsnr": self.avg_psnr, "avgSsim": self.avg_ssim}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)
