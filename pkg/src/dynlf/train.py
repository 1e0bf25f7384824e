"""Training on randomly cropped patches of oracle light fields."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Config
from .interp import prepare_sources
from .lightfield import LightField, SparseInput, shear
from .losses import LossReport, disparity_loss, recon_terms, total_loss
from .model import ModelParams
from .nn import AdamState, StepSchedule, Tape, Tensor, adam_step, ops
from .oracle import BlockMatchConfig, estimate_disparity_bm, perturb_disparity
from .pipeline import Scene, render_region

log = logging.getLogger(__name__)


@dataclass
class TrainItem:
    lf: LightField          # ground-truth views and per-view disparities
    scene: Scene            # source views with the disparities the model sees


def source_disparities(lf: LightField, sources, how: str, sigma: float = 0.5,
                       seed: int = 0, d_max: float = 2.0):
    """Disparity maps handed to the model for the two source views."""
    s1, s2 = sources
    if how == "gt":
        return lf.disparity(s1), lf.disparity(s2)
    if how == "gt+noise":
        return tuple(perturb_disparity(lf.disparity(s), sigma, seed * 1000 + s, d_max)
                     for s in sources)
    if how == "blockmatch":
        cfg = BlockMatchConfig(d_max=d_max)
        return (estimate_disparity_bm(lf.view(s1), lf.view(s2), s1, s2, cfg),
                estimate_disparity_bm(lf.view(s2), lf.view(s1), s2, s1, cfg))
    raise ValueError(f"unknown disparity source {how!r}")


def build_dataset(lightfields, cfg: Config, seed: int | None = None) -> list[TrainItem]:
    """Check each light field and precompute its parameter-independent inputs."""
    tc = cfg.train
    seed = tc.seed if seed is None else seed
    items = []
    for i, lf in enumerate(lightfields):
        if lf.disparities is None:
            raise ValueError(f"light field {i} has no ground-truth disparity maps")
        needed = set(tc.sources) | set(tc.targets)
        if max(needed) >= lf.U or min(needed) < 0:
            raise ValueError(f"light field {i} has {lf.U} views; config needs {sorted(needed)}")
        if lf.shape[0] < tc.patch_size or lf.shape[1] < tc.patch_size:
            raise ValueError(f"light field {i} is smaller than the training patch")
        items.append(make_item(lf, cfg, seed + i))
    return items


def renoise(item: TrainItem, cfg: Config, seed: int) -> TrainItem:
    """Same light field with a new draw of the disparity noise."""
    return make_item(item.lf, cfg, seed)


def make_item(lf: LightField, cfg: Config, seed: int) -> TrainItem:
    tc = cfg.train
    disp = source_disparities(lf, tc.sources, tc.disparity_source, tc.noise_sigma, seed,
                              cfg.warp.d_max)
    inputs = SparseInput(tuple(tc.sources), tuple(lf.view(s) for s in tc.sources), disp)
    return TrainItem(lf, Scene(inputs, cfg.warp, tc.targets))


def shear_range(lf: LightField, d_max: float, min_width: int) -> tuple[int, int]:
    """Integer shears that keep every disparity within ``d_max`` and the view wide enough."""
    lo = math.ceil(float(lf.disparities.max()) - d_max - 1e-9)
    hi = math.floor(float(lf.disparities.min()) + d_max + 1e-9)
    span = max(lf.indices) - min(lf.indices)
    reach = (lf.shape[1] - min_width) // span if span else 0
    return max(lo, -reach), min(hi, reach)


def patch_loss(item: TrainItem, region, params: ModelParams, cfg: Config):
    """Total loss on one patch of every novel view; returns ``(loss, LossReport)``.

    Must be called inside an active :class:`Tape` for gradients.
    """
    tc = cfg.train
    y0, y1, x0, x1 = region
    contexts = prepare_sources(item.scene.inputs, params, params.arch, cfg.warp.kernel)
    view_losses, finals = [], {}
    parts_f, parts_b, parts_s = [], [], []
    for t in tc.targets:
        res = render_region(contexts, item.scene, t, region, params, params.arch, cfg.refine,
                            tc.mode)
        gt = item.lf.view(t)[y0:y1, x0:x1]
        f, b, ps = recon_terms(res.final, res.blended, res.per_source, gt)
        v = ops.add(f, b)
        for p in ps:
            v = ops.add(v, p)
        view_losses.append(v)
        finals[t] = res.final
        parts_f.append(float(f.data))
        parts_b.append(float(b.data))
        parts_s.append([float(p.data) for p in ps])

    order = sorted(set(tc.sources) | set(tc.targets))
    stack = [finals[u] if u in finals else Tensor(item.lf.view(u)[y0:y1, x0:x1].astype(float))
             for u in order]
    gt_stack = item.lf.views[order][:, y0:y1, x0:x1].astype(np.float64)
    gt_disp = item.lf.disparities[order][:, y0:y1, x0:x1]
    epi = disparity_loss(ops.stack(stack), gt_stack, gt_disp, order)
    loss = total_loss(view_losses, epi, tc.lam)
    report = LossReport(float(np.mean(parts_f)), float(np.mean(parts_b)),
                        [float(v) for v in np.mean(parts_s, axis=0)], float(epi.data), tc.lam)
    return loss, report


def train(dataset: list[TrainItem], cfg: Config, params: ModelParams | None = None,
          log_path=None, ckpt_dir=None):
    """Adam on random patches; returns ``(params, records)``.

    Each record is ``{step, lr, reconFinal, reconBlend, reconPerSource,
    epiLoss, total}``.  ``log_path`` receives the same records as JSON lines.
    Deterministic for a fixed seed when BLAS runs single-threaded.
    """
    if not dataset:
        raise ValueError("empty training set")
    tc = cfg.train
    if params is None:
        params = ModelParams(cfg.arch, cfg.warp, tc.seed, tc.mode)
    if params.mode != tc.mode:
        raise ValueError(f"parameters are for {params.mode} mode, config asks for {tc.mode}")
    state = AdamState(schedule=StepSchedule(tc.lr_initial, tc.lr_after_drop, tc.drop_step))
    rng = np.random.default_rng(tc.seed)
    P = tc.patch_size
    records = []
    fh = open(log_path, "w") if log_path else None
    try:
        for step in range(tc.max_steps):
            item = dataset[int(rng.integers(len(dataset)))]
            lf = item.lf
            if tc.shear_augment and tc.disparity_source != "blockmatch":
                # a few scenes show only a few disparities; shearing shifts them all
                lo, hi = shear_range(lf, cfg.warp.d_max, P)
                k = int(rng.integers(lo, hi + 1)) if hi >= lo else 0
                lf = shear(lf, k) if k else lf
            H, W, _ = lf.shape
            y0 = int(rng.integers(0, H - P + 1))
            x0 = int(rng.integers(0, W - P + 1))
            if tc.resample_noise and tc.disparity_source == "gt+noise":
                # a fixed noise field per scene gets memorised by the refinement
                item = make_item(lf, cfg, int(rng.integers(2 ** 31)))
            elif lf is not item.lf:
                item = make_item(lf, cfg, int(rng.integers(2 ** 31)))
            with Tape() as tape:
                loss, report = patch_loss(item, (y0, y0 + P, x0, x0 + P), params, cfg)
            grads = tape.backward(loss)
            named = {name: grads[p] for name, p in params.tensors.items() if p in grads}
            lr = adam_step(params.tensors, named, state)
            rec = {"step": step, "lr": lr, "reconFinal": report.recon_final,
                   "reconBlend": report.recon_blend, "reconPerSource": report.recon_per_source,
                   "epiLoss": report.epi_loss, "total": float(loss.data)}
            records.append(rec)
            if fh:
                fh.write(json.dumps(rec) + "\n")
            if step % 100 == 0:
                log.info("step %d  loss %.5f  lr %.1e", step, rec["total"], lr)
            if ckpt_dir and tc.ckpt_every and (step + 1) % tc.ckpt_every == 0:
                Path(ckpt_dir).mkdir(parents=True, exist_ok=True)
                params.save(Path(ckpt_dir) / f"step_{step + 1:06d}.ckpt")
    finally:
        if fh:
            fh.close()
    return params, records
