"""End-to-end synthesis of novel views from a sparse input."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import ArchConfig, RefineConfig
from .interp import (prepare_sources, source_confidences, synthesize_region, blend)
from .lightfield import SparseInput
from .nn import Tensor, ops
from .refine import refine_image
from .warp import WarpConfig, backward_warp, target_disparity


@dataclass
class ViewResult:
    t: int
    per_source: list           # Tensors (h, w, C)
    confidences: list          # Tensors (h, w)
    blended: Tensor
    final: Tensor
    seconds: float = 0.0

    def numpy(self) -> dict:
        return {"per_source": [p.data for p in self.per_source],
                "confidences": [c.data for c in self.confidences],
                "blended": self.blended.data, "final": self.final.data}


class Scene:
    """Per-input constants that do not depend on the network parameters."""

    def __init__(self, inputs: SparseInput, warp: WarpConfig, targets=()):
        self.inputs = inputs
        self.warp = warp
        self.disparity_t = {}
        self.warped = {}
        for t in targets:
            self.prepare_target(t)

    def prepare_target(self, t: int) -> None:
        if t in self.disparity_t:
            return
        d = target_disparity(self.inputs, t)
        self.disparity_t[t] = d
        self.warped[t] = [backward_warp(img, d, s, t, self.warp.kernel)
                          for img, s in zip(self.inputs.views, self.inputs.indices)]


def render_region(contexts, scene: Scene, t: int, region, params, arch: ArchConfig,
                  refine_cfg: RefineConfig, mode: str = "dynamic", refine: bool = True,
                  refine_region=None) -> ViewResult:
    """Synthesise ``region = (y0, y1, x0, x1)`` of view ``t`` (taped if a Tape is active)."""
    scene.prepare_target(t)
    start = time.perf_counter()
    images, logits = [], []
    for i, ctx in enumerate(contexts):
        img, lg, _ = synthesize_region(ctx, t, region, params, arch, scene.warp.d_max,
                                       mode, scene.warped[t][i])
        images.append(img)
        logits.append(lg)
    conf = source_confidences(logits, arch.normalize_confidence)
    blended = blend(images, conf)
    final = blended
    if refine and refine_cfg.enabled:
        y0, _, x0, _ = region
        final = refine_image(blended, scene.inputs.views, scene.inputs.indices, t,
                             scene.disparity_t[t], params, arch, refine_cfg, origin=(y0, x0))
    return ViewResult(t, images, conf, blended, final, time.perf_counter() - start)


def _untrained_baseline(scene: Scene, t: int) -> ViewResult:
    """Classical warping with equal-weight blending (no learned parts)."""
    start = time.perf_counter()
    imgs = [Tensor(w) for w in scene.warped[t]]
    H, W = imgs[0].shape[:2]
    conf = [Tensor(np.full((H, W), 1.0 / len(imgs))) for _ in imgs]
    b = blend(imgs, conf)
    return ViewResult(t, imgs, conf, b, b, time.perf_counter() - start)


def reconstruct(inputs: SparseInput, targets, params=None, arch: ArchConfig | None = None,
                warp: WarpConfig | None = None, refine_cfg: RefineConfig | None = None,
                mode: str = "dynamic", refine: bool = True, chunk_rows: int = 16,
                scene: Scene | None = None) -> dict[int, ViewResult]:
    """Synthesise full views ``targets``.

    Synthesis is per-pixel, so the image is processed in bands of
    ``chunk_rows`` rows to bound memory; refinement then runs on the whole
    blended view.  ``params=None`` is only allowed in baseline mode and gives
    plain warping with equal blending.
    """
    if params is not None:
        arch = arch or params.arch
        warp = warp or params.warp
    warp = warp or WarpConfig()
    refine_cfg = refine_cfg or RefineConfig()
    scene = scene or Scene(inputs, warp)
    results = {}
    if params is None:
        if mode != "baseline":
            raise ValueError("dynamic mode needs trained parameters")
        for t in targets:
            scene.prepare_target(t)
            results[t] = _untrained_baseline(scene, t)
        return results
    if mode == "dynamic" and "fw.0.w" not in params:
        raise ValueError("checkpoint has no interpolation-weight network (baseline model?)")

    contexts = prepare_sources(inputs, params, arch, warp.kernel)
    H, W, C = inputs.shape
    for t in targets:
        start = time.perf_counter()
        parts = []
        for y0 in range(0, H, chunk_rows):
            y1 = min(H, y0 + chunk_rows)
            parts.append(render_region(contexts, scene, t, (y0, y1, 0, W), params, arch,
                                       refine_cfg, mode, refine=False))
        images = [Tensor(np.concatenate([p.per_source[i].data for p in parts]))
                  for i in range(len(contexts))]
        conf = [Tensor(np.concatenate([p.confidences[i].data for p in parts]))
                for i in range(len(contexts))]
        blended = Tensor(np.concatenate([p.blended.data for p in parts]))
        final = blended
        if refine and refine_cfg.enabled:
            final = refine_image(blended, inputs.views, inputs.indices, t,
                                 scene.disparity_t[t], params, arch, refine_cfg)
        results[t] = ViewResult(t, images, conf, blended, final, time.perf_counter() - start)
    return results
