"""Reconstruction loss and the EPI-direction structure loss."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import Tensor, ops


@dataclass
class LossReport:
    recon_final: float
    recon_blend: float
    recon_per_source: list = field(default_factory=list)
    epi_loss: float = 0.0
    lam: float = 0.1

    @property
    def total(self) -> float:
        return (self.recon_final + self.recon_blend + sum(self.recon_per_source)
                + self.lam * self.epi_loss)


def recon_terms(final, blended, per_source, target):
    """Mean-L1 errors of the final, blended and per-source predictions."""
    target = np.asarray(target, dtype=np.float64)
    return (ops.l1_mean(final, target), ops.l1_mean(blended, target),
            [ops.l1_mean(p, target) for p in per_source])


def recon_loss(final, blended, per_source, target) -> Tensor:
    f, b, ps = recon_terms(final, blended, per_source, target)
    out = ops.add(f, b)
    for p in ps:
        out = ops.add(out, p)
    return out


def _epi_stencil(disparities, indices, W):
    """Tap columns and weights of the linear sample at ``x + d * step`` for each pair."""
    d = np.asarray(disparities, dtype=np.float64)[:-1]              # (U-1, H, W)
    step = np.diff(np.asarray(indices, dtype=np.float64))[:, None, None]
    pos = np.arange(W)[None, None, :] + d * step
    x0 = np.floor(pos)
    f = pos - x0
    x0 = x0.astype(np.int64)
    return np.clip(x0, 0, W - 1), np.clip(x0 + 1, 0, W - 1), 1.0 - f, f


def epi_gradient(views, disparities, indices=None) -> Tensor:
    """Differences along EPI lines between consecutive views.

    ``g[u, y, x] = L[u+1](x + d[u](x, y) * step, y) - L[u](x, y)`` with linear
    interpolation and replicated borders; ``views`` is ``(U, H, W, C)`` and
    ``disparities`` ``(U, H, W)`` (the disparity of each view).
    """
    if disparities is None:
        raise ValueError("EPI gradients need a disparity map for every view")
    views = views if isinstance(views, Tensor) else Tensor(np.asarray(views, dtype=np.float64))
    U, H, W, C = views.shape
    if np.shape(disparities) != (U, H, W):
        raise ValueError(f"disparities shape {np.shape(disparities)} != {(U, H, W)}")
    if indices is None:
        indices = np.arange(U)
    x0, x1, w0, w1 = _epi_stencil(disparities, indices, W)
    u_next = np.arange(1, U)[:, None, None]
    rows = np.arange(H)[None, :, None]
    base = (u_next * H + rows) * W
    flat = ops.reshape(views, (U * H * W, C))
    a = ops.take_rows(flat, base + x0)
    b = ops.take_rows(flat, base + x1)
    sampled = ops.add(ops.mul(a, w0[..., None]), ops.mul(b, w1[..., None]))
    current = ops.getitem(views, slice(0, U - 1))
    return ops.sub(sampled, current)


def disparity_loss(pred_views, gt_views, gt_disparities, indices=None) -> Tensor:
    """Mean L1 distance between predicted and ground-truth EPI-line gradients."""
    gp = epi_gradient(pred_views, gt_disparities, indices)
    gg = epi_gradient(gt_views, gt_disparities, indices)
    return ops.l1_mean(gp, gg.data)


def total_loss(view_losses, epi, lam: float) -> Tensor:
    """Average per-view reconstruction loss plus ``lam`` times the structure loss."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    acc = view_losses[0]
    for v in view_losses[1:]:
        acc = ops.add(acc, v)
    acc = ops.mul(acc, 1.0 / len(view_losses))
    return ops.add(acc, ops.mul(epi, lam)) if lam else acc
