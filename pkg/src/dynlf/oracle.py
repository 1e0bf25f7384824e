"""Procedural layered scenes with exact ground truth, and a block matcher.

A scene is a stack of fronto-parallel layers, nearest first.  Each layer has a
constant disparity (larger = nearer), a rectangular extent in the reference
view and a smooth procedural texture.  Because textures are evaluated
analytically at the shifted coordinates, every view is rendered exactly;
the only error a linear warp makes on visible pixels is the interpolation
error of a band-limited signal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter

from .lightfield import LightField, as_image


@dataclass
class Texture:
    """Sum of sinusoids, rescaled to ``[0.05, 0.95]`` per channel."""

    freqs: np.ndarray       # (n, 2) angular frequencies (kx, ky) in rad/pixel
    amps: np.ndarray        # (n,)
    phases: np.ndarray      # (n, C)

    def __call__(self, X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)[..., None, None]
        Y = np.asarray(Y, dtype=np.float64)[..., None, None]
        arg = self.freqs[:, 0, None] * X + self.freqs[:, 1, None] * Y + self.phases
        s = (self.amps[:, None] * np.sin(arg)).sum(axis=-2)
        return 0.5 + 0.45 * s / self.amps.sum()


def random_texture(rng: np.random.Generator, channels: int = 3, n_waves: int = 12,
                   f_min: float = 0.05, f_max: float = 0.4) -> Texture:
    """A few strong low-frequency waves plus weaker, higher ones (smooth noise)."""
    mag = np.sort(rng.uniform(f_min, f_max, n_waves))
    angle = rng.uniform(0, np.pi, n_waves)
    freqs = np.stack([mag * np.cos(angle), mag * np.sin(angle)], axis=1)
    amps = (f_min / mag) ** 0.7 * rng.uniform(0.5, 1.0, n_waves)
    phases = rng.uniform(0, 2 * np.pi, (n_waves, channels))
    return Texture(freqs, amps, phases)


@dataclass
class Layer:
    disparity: float
    x_range: tuple[float, float] | None = None     # in reference-view pixels
    y_range: tuple[float, float] | None = None
    texture: Texture | None = None


@dataclass
class SceneOracle:
    layers: list[Layer]
    U: int
    H: int
    W: int
    seed: int
    d_max: float
    lightfield: LightField
    layer_index: np.ndarray                 # (U, H, W) visible layer per pixel
    masks: dict = field(default_factory=dict)

    @property
    def gt_disparity(self) -> np.ndarray:
        return self.lightfield.disparities

    def occlusion_mask(self, t: int, s: int) -> np.ndarray:
        """Pixels of view ``t`` whose correspondent in view ``s`` is not visible.

        A pixel counts as occluded when any linear-interpolation tap at its
        correspondent shows a different layer or falls outside the frame.
        """
        key = (t, s)
        if key not in self.masks:
            self.masks[key] = _occlusion(self.layer_index, self.layers, t, s)
        return self.masks[key]


def _occlusion(layer_index, layers, t, s):
    _, H, W = layer_index.shape
    lt = layer_index[t]
    disp = np.array([l.disparity for l in layers])[lt]
    pos = np.arange(W)[None, :] + disp * (s - t)
    base = np.floor(pos)
    frac = pos - base
    taps = [base, np.where(frac > 1e-9, base + 1, base)]
    rows = np.broadcast_to(np.arange(H)[:, None], (H, W))
    mask = np.zeros((H, W), dtype=bool)
    for tap in taps:
        inside = (tap >= 0) & (tap <= W - 1)
        ti = np.clip(tap, 0, W - 1).astype(np.int64)
        mask |= ~inside | (layer_index[s][rows, ti] != lt)
    return mask


def random_layers(rng: np.random.Generator, n_layers: int, H: int, W: int, d_max: float,
                  min_gap: float = 0.5, integer: bool = False) -> list[Layer]:
    """Random front layers over a full-frame background, nearest first."""
    for _ in range(1000):
        if integer:
            pool = np.arange(-math.floor(d_max), math.floor(d_max) + 1)
            d = rng.choice(pool, n_layers, replace=False).astype(float)
        else:
            d = rng.uniform(-d_max, d_max, n_layers)
        d = np.sort(d)[::-1]
        if n_layers == 1 or np.min(-np.diff(d)) >= min_gap:
            break
    else:
        raise ValueError("could not place layer disparities with the requested gap")
    layers = []
    for i, di in enumerate(d):
        if i == n_layers - 1:
            layers.append(Layer(float(di)))
            continue
        width = rng.uniform(W / 6, W / 2.5)
        x0 = rng.uniform(W * 0.15, W * 0.85 - width)
        height = rng.uniform(H / 2, H * 0.9)
        y0 = rng.uniform(0, H - height)
        layers.append(Layer(float(di), (x0, x0 + width), (y0, y0 + height)))
    return layers


def gen_scene(seed: int, U: int = 5, H: int = 64, W: int = 64, layers=None,
              d_max: float = 3.0, n_layers: int = 2, channels: int = 3,
              integer_disparity: bool = False) -> SceneOracle:
    """Render a layered scene into a light field with ground-truth disparity.

    ``layers`` (nearest first, strictly decreasing disparity) may be given
    without textures; missing textures are drawn from ``seed``.  The
    reference view is the central one.
    """
    root = np.random.SeedSequence(seed)
    layout_seq, *tex_seqs = root.spawn(1 + max(n_layers, len(layers or [])))
    if layers is None:
        layers = random_layers(np.random.default_rng(layout_seq), n_layers, H, W, d_max,
                               integer=integer_disparity)
    layers = [Layer(l.disparity, l.x_range, l.y_range, l.texture) for l in layers]
    ds = [l.disparity for l in layers]
    for d in ds:
        if abs(d) > d_max + 1e-12:
            raise ValueError(f"layer disparity {d} exceeds d_max={d_max}")
    if any(a <= b for a, b in zip(ds, ds[1:])):
        raise ValueError("layers must be ordered nearest first with decreasing disparity")
    for l, seq in zip(layers, tex_seqs):
        if l.texture is None:
            l.texture = random_texture(np.random.default_rng(seq), channels)

    u_ref = (U - 1) / 2
    xs = np.arange(W, dtype=np.float64)
    ys = np.arange(H, dtype=np.float64)
    views = np.zeros((U, H, W, channels))
    disp = np.zeros((U, H, W))
    index = np.full((U, H, W), -1, dtype=np.int64)
    for u in range(U):
        for i in reversed(range(len(layers))):          # paint far to near
            l = layers[i]
            shift = l.disparity * (u - u_ref)
            X = xs[None, :] - shift                      # reference-view coordinate
            cover = np.ones((H, W), dtype=bool)
            if l.x_range is not None:
                cover &= (X >= l.x_range[0]) & (X < l.x_range[1])
            if l.y_range is not None:
                cover &= ((ys >= l.y_range[0]) & (ys < l.y_range[1]))[:, None]
            tex = l.texture(np.broadcast_to(X, (H, W)), np.broadcast_to(ys[:, None], (H, W)))
            views[u][cover] = tex[cover]
            disp[u][cover] = l.disparity
            index[u][cover] = i
    if np.any(index < 0):
        raise ValueError("the last layer must cover the whole frame")
    lf = LightField(views, disp, d_max)
    return SceneOracle(layers, U, H, W, seed, d_max, lf, index)


@dataclass
class BlockMatchConfig:
    window: int = 9
    search_range: int | None = None     # pixels between the two views; default from d_max
    d_max: float = 3.0
    subpixel: bool = True

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("window must be a positive odd number")


def estimate_disparity_bm(img_s, img_other, s: int, s_other: int,
                          cfg: BlockMatchConfig | None = None) -> np.ndarray:
    """Disparity of view ``s`` (pixels per angular step) by SAD block matching.

    Candidate shifts are integers between the two views; the winner is
    refined with a parabola through its cost and its two neighbours.  Ties
    go to the candidate closest to zero.  Textureless regions give arbitrary
    (but deterministic) output.
    """
    cfg = cfg or BlockMatchConfig()
    step = s_other - s
    if step == 0:
        raise ValueError("block matching needs two different views")
    a = as_image(img_s).astype(np.float64)
    b = as_image(img_other).astype(np.float64)
    H, W, _ = a.shape
    R = cfg.search_range
    if R is None:
        R = math.ceil(cfg.d_max * abs(step) - 1e-9)
    shifts = np.arange(-R, R + 1)
    cost = np.empty((len(shifts), H, W))
    cols = np.arange(W)
    for i, k in enumerate(shifts):
        moved = b[:, np.clip(cols + k, 0, W - 1)]
        cost[i] = uniform_filter(np.abs(a - moved).sum(axis=2), cfg.window, mode="nearest")
    # visit candidates by increasing |k| so strict improvement keeps the smaller shift
    order = sorted(range(len(shifts)), key=lambda i: (abs(shifts[i]), -shifts[i]))
    best = np.full((H, W), order[0])
    best_cost = cost[order[0]].copy()
    for i in order[1:]:
        better = cost[i] < best_cost
        best[better] = i
        best_cost[better] = cost[i][better]
    d = shifts[best].astype(np.float64)
    if cfg.subpixel:
        inner = (best > 0) & (best < len(shifts) - 1)
        lo = np.take_along_axis(cost, np.clip(best - 1, 0, None)[None], 0)[0]
        hi = np.take_along_axis(cost, np.clip(best + 1, None, len(shifts) - 1)[None], 0)[0]
        denom = lo - 2 * best_cost + hi
        # an exact (zero-cost) match needs no refinement
        ok = inner & (denom > 0) & (best_cost > 0)
        off = np.zeros_like(d)
        off[ok] = 0.5 * (lo[ok] - hi[ok]) / denom[ok]
        d += np.clip(off, -0.5, 0.5)
    return d / step


def perturb_disparity(disparity, sigma: float, seed: int, d_max: float | None = None):
    """Add i.i.d. Gaussian noise (clamped to ``[-d_max, d_max]`` when given)."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    d = np.asarray(disparity, dtype=np.float64)
    if sigma == 0:
        return d.copy()
    out = d + np.random.default_rng(seed).normal(0.0, sigma, d.shape)
    if d_max is not None:
        out = np.clip(out, -d_max, d_max)
    return out
