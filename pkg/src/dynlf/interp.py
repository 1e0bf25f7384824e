"""Dynamic interpolation: learned per-neighbour weights and confidence blending.

A target pixel ``(x_t, y)`` of view ``t`` is synthesised from the row
``y`` of source view ``s`` as a weighted sum over the neighbourhood
``x_t - r .. x_t + r`` with ``r = ceil(d_max |s - t|)``.  The weight of each
neighbour comes from an MLP applied to an embedding of

* the source disparity at the neighbour,
* the horizontal offset to the target pixel (raw and normalised by ``r``),
* the angular offset ``s - t``,
* content features of the neighbour computed by a CNN over the source view,
  the other source warped onto it, and its disparity.

Every function accepts a region ``(y0, y1, x0, x1)`` of the target view so the
same code path serves training patches and full-image inference.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ArchConfig
from .lightfield import SparseInput
from .nn import Tensor, ops
from .nn.layers import mlp, resnet
from .warp import Neighborhood, WarpConfig, neighbor_table, warp_source_to_source


@dataclass
class SourceContext:
    """Per-source constants plus the (possibly taped) content feature map."""

    s: int
    image: np.ndarray           # (H, W, C)
    disparity: np.ndarray       # (H, W)
    other_warped: np.ndarray    # (H, W, C)
    features: Tensor            # (F, H, W)
    feature_rows: Tensor        # (H * W, F)

    @property
    def shape(self):
        return self.image.shape


def content_features(image, other_warped, disparity, params, arch: ArchConfig) -> Tensor:
    """Content feature map ``(F, H, W)`` from the stacked source inputs."""
    image = np.asarray(image, dtype=np.float64)
    other_warped = np.asarray(other_warped, dtype=np.float64)
    disparity = np.asarray(disparity, dtype=np.float64)
    if image.shape != other_warped.shape or image.shape[:2] != disparity.shape:
        raise ValueError("content inputs must share their spatial size")
    x = np.concatenate([image, other_warped, disparity[:, :, None]], axis=2).transpose(2, 0, 1)
    return resnet(params, "fc", Tensor(np.ascontiguousarray(x)), arch.res_blocks, arch.slope)


def prepare_sources(inputs: SparseInput, params, arch: ArchConfig,
                    kernel: str = "linear") -> list[SourceContext]:
    """Warp each source's partner onto it and compute its content features."""
    contexts = []
    for i, (img, disp, s) in enumerate(zip(inputs.views, inputs.disparities, inputs.indices)):
        j = 1 - i
        warped = warp_source_to_source(inputs.views[j], disp, inputs.indices[j], s, kernel)
        feats = content_features(img, warped, disp, params, arch)
        F, H, W = feats.shape
        rows = ops.transpose(ops.reshape(feats, (F, H * W)), (1, 0))
        contexts.append(SourceContext(s, img, disp, warped, feats, rows))
    return contexts


def _embed(rows, xt, coords, disparity, feature_rows, s, t, d_max) -> Tensor:
    """Embeddings ``(N, K, 4 + F)`` for target pixels ``(xt[n], rows[n])``."""
    W = disparity.shape[1]
    geo = disparity[rows[:, None], coords]
    spa = (coords - xt[:, None]).astype(np.float64)
    reach = d_max * abs(s - t)
    spa_n = spa / reach if reach > 0 else np.zeros_like(spa)
    ang = np.full_like(spa, float(s - t))
    geometric = Tensor(np.stack([geo, spa, spa_n, ang], axis=-1))
    content = ops.take_rows(feature_rows, rows[:, None] * W + coords)
    return ops.concat([geometric, content], axis=2)


def embed_region(ctx: SourceContext, t: int, region, d_max: float):
    """Embeddings for every pixel of ``region``; returns ``(emb, coords, rows)``."""
    y0, y1, x0, x1 = region
    H, W = ctx.disparity.shape
    table = neighbor_table(W, ctx.s, t, d_max)[x0:x1]           # (w, K)
    h, w = y1 - y0, x1 - x0
    coords = np.broadcast_to(table, (h, w, table.shape[1])).reshape(h * w, -1)
    rows = np.repeat(np.arange(y0, y1), w)
    xt = np.tile(np.arange(x0, x1), h)
    return _embed(rows, xt, coords, ctx.disparity, ctx.feature_rows, ctx.s, t, d_max), coords, rows


def build_embeddings(x_t: int, y_t: int, nbhd: Neighborhood, disparity, features,
                     s: int, t: int, cfg: WarpConfig) -> np.ndarray:
    """Embeddings ``(K, 4 + F)`` of one target pixel's neighbourhood."""
    disparity = np.asarray(disparity, dtype=np.float64)
    feats = features.data if isinstance(features, Tensor) else np.asarray(features)
    F, H, W = feats.shape
    rows = Tensor(feats.reshape(F, H * W).T)
    emb = _embed(np.array([y_t]), np.array([x_t]), nbhd.coords[None, :], disparity, rows,
                 s, t, cfg.d_max)
    return emb.data[0]


def predict_weights(emb, params, arch: ArchConfig) -> Tensor:
    """Interpolation weights ``(N, K)``; softmax over neighbours when normalising."""
    emb = emb if isinstance(emb, Tensor) else Tensor(np.asarray(emb, dtype=np.float64))
    if emb.ndim == 2:
        emb = ops.reshape(emb, (1,) + emb.shape)
    N, K, E = emb.shape
    if E != arch.embed_dim:
        raise ValueError(f"embedding width {E} != configured {arch.embed_dim}")
    logits = mlp(params, "fw", ops.reshape(emb, (N * K, E)), len(arch.fw_hidden) + 1, arch.slope)
    logits = ops.reshape(logits, (N, K))
    return ops.softmax(logits, axis=1) if arch.normalize_weights else logits


def interpolate(weights, values) -> Tensor:
    """Per-channel weighted sum: ``weights (N, K)`` times ``values (N, K, C)``."""
    weights = weights if isinstance(weights, Tensor) else Tensor(np.asarray(weights, float))
    N, K = weights.shape
    return ops.sum(ops.mul(ops.reshape(weights, (N, K, 1)), values), axis=1)


def interpolate_pixel(weights, image, nbhd: Neighborhood) -> np.ndarray:
    """Colour of one target pixel from its neighbourhood in ``image``."""
    values = np.asarray(image, dtype=np.float64)[nbhd.y_t, nbhd.coords]    # (K, C)
    w = weights.data if isinstance(weights, Tensor) else np.asarray(weights, float)
    if w.shape[-1] != nbhd.K:
        raise ValueError(f"need {nbhd.K} weights, got {w.shape[-1]}")
    return interpolate(w.reshape(1, -1), values[None]).data[0]


def predict_confidence(emb, params, arch: ArchConfig, k_max: int) -> Tensor:
    """Confidence logit per pixel ``(N,)`` from the concatenated neighbour embeddings.

    Neighbourhoods smaller than ``k_max`` are zero-padded on both sides so
    the MLP input width is fixed.
    """
    emb = emb if isinstance(emb, Tensor) else Tensor(np.asarray(emb, dtype=np.float64))
    if emb.ndim == 2:
        emb = ops.reshape(emb, (1,) + emb.shape)
    N, K, E = emb.shape
    if K > k_max or (k_max - K) % 2:
        raise ValueError(f"neighbourhood of {K} does not fit the confidence net ({k_max})")
    flat = ops.reshape(emb, (N, K * E))
    pad = (k_max - K) // 2 * E
    if pad:
        zeros = Tensor(np.zeros((N, pad)))
        flat = ops.concat([zeros, flat, zeros], axis=1)
    out = mlp(params, "fb", flat, len(arch.fb_hidden) + 1, arch.slope)
    return ops.reshape(out, (N,))


def source_confidences(logits, normalize: bool = True) -> list[Tensor]:
    """Turn one logit map per source into confidence maps (softmax across sources)."""
    if not normalize:
        return list(logits)
    shape = logits[0].shape
    stacked = ops.stack([ops.reshape(l, (-1,)) for l in logits], axis=1)
    conf = ops.softmax(stacked, axis=1)
    return [ops.reshape(conf[:, i], shape) for i in range(len(logits))]


def blend(images, confidences) -> Tensor:
    """``sum_s confidence_s * image_s`` with confidences broadcast over channels."""
    out = None
    for img, c in zip(images, confidences):
        img = img if isinstance(img, Tensor) else Tensor(np.asarray(img, float))
        c = c if isinstance(c, Tensor) else Tensor(np.asarray(c, float))
        if c.shape != img.shape[:-1]:
            raise ValueError(f"confidence shape {c.shape} does not match image {img.shape}")
        term = ops.mul(ops.reshape(c, c.shape + (1,)), img)
        out = term if out is None else ops.add(out, term)
    return out


def synthesize_region(ctx: SourceContext, t: int, region, params, arch: ArchConfig,
                      d_max: float, mode: str = "dynamic", warped=None):
    """Synthesise ``region`` of view ``t`` from one source.

    Returns ``(image (h, w, C), logits (h, w), weights (N, K) or None)``.  In
    baseline mode ``warped`` (the full fixed-kernel warp of the source) supplies
    the image and only the confidence is learned.
    """
    y0, y1, x0, x1 = region
    h, w = y1 - y0, x1 - x0
    C = ctx.image.shape[2]
    emb, coords, rows = embed_region(ctx, t, region, d_max)
    weights = None
    if mode == "dynamic":
        weights = predict_weights(emb, params, arch)
        values = ctx.image[rows[:, None], coords]                    # (N, K, C)
        image = ops.reshape(interpolate(weights, values), (h, w, C))
    else:
        image = Tensor(np.ascontiguousarray(warped[y0:y1, x0:x1]))
    logits = ops.reshape(predict_confidence(emb, params, arch, params.k_max), (h, w))
    return image, logits, weights


def synthesize_from_source(inputs: SparseInput, s: int, t: int, params, arch: ArchConfig,
                           warp: WarpConfig):
    """Full-view synthesis of ``t`` from source ``s`` with the learned weights.

    Returns ``(image, embeddings)`` where ``embeddings`` is ``(H*W, K, E)``.
    """
    ctxs = prepare_sources(inputs, params, arch)
    ctx = ctxs[inputs.indices.index(s)]
    H, W, _ = ctx.shape
    emb, coords, rows = embed_region(ctx, t, (0, H, 0, W), warp.d_max)
    weights = predict_weights(emb, params, arch)
    img = interpolate(weights, ctx.image[rows[:, None], coords])
    return img.data.reshape(ctx.shape), emb.data
