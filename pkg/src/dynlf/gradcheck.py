"""Finite-difference checks of the analytic gradients.

Every check reduces an op's output to a scalar with a fixed random readout,
perturbs a sample of input entries by ``+-h`` and compares the central
difference with the taped gradient.  The relative error of one entry is
``|a - fd| / max(|a|, |fd|, 1e-8)``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import ArchConfig, Config, RefineConfig, TrainConfig
from .losses import disparity_loss, epi_gradient
from .model import ModelParams
from .nn import Tape, Tensor, ops
from .nn.layers import init_mlp, init_resnet, mlp, residual_block
from .oracle import gen_scene
from .warp import WarpConfig

OP_TOL = 1e-6
COMPOSED_TOL = 1e-4
STEP = 1e-5


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    threshold: float
    n_entries: int
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.max_rel_err < self.threshold)


def rel_error(a, b) -> np.ndarray:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def _sample(size: int, limit: int | None, rng) -> np.ndarray:
    if limit is None or size <= limit:
        return np.arange(size)
    return np.sort(rng.choice(size, limit, replace=False))


def check_function(name: str, loss_fn, tensors, threshold: float = OP_TOL, h: float = STEP,
                   max_entries: int | None = None, rng=None) -> CheckResult:
    """Compare gradients of the scalar ``loss_fn()`` w.r.t. ``tensors``.

    ``loss_fn`` must read the tensors' current ``data`` each time it is called.
    """
    rng = rng or np.random.default_rng(0)
    start = time.perf_counter()
    with Tape() as tape:
        loss = loss_fn()
    grads = tape.backward(loss)
    worst, count = 0.0, 0
    for t in tensors:
        g = grads.get(t)
        g = np.zeros(t.shape) if g is None else g
        flat = t.data.reshape(-1)
        for i in _sample(flat.size, max_entries, rng):
            keep = flat[i]
            flat[i] = keep + h
            up = float(loss_fn().data)
            flat[i] = keep - h
            down = float(loss_fn().data)
            flat[i] = keep
            fd = (up - down) / (2 * h)
            worst = max(worst, float(rel_error(g.reshape(-1)[i], fd)))
            count += 1
    return CheckResult(name, worst, threshold, count, time.perf_counter() - start)


def check_op(name: str, fn, inputs, threshold: float = OP_TOL, seed: int = 0,
             max_entries: int | None = None) -> CheckResult:
    """Gradient check of ``fn(*inputs)`` through a random linear readout."""
    rng = np.random.default_rng(seed)
    inputs = [x if isinstance(x, Tensor) else Tensor(np.asarray(x, float), requires_grad=True)
              for x in inputs]
    probe = {}

    def loss_fn():
        out = fn(*inputs)
        if "r" not in probe:
            probe["r"] = rng.normal(size=out.shape)
        return ops.sum(ops.mul(out, probe["r"]))

    return check_function(name, loss_fn, [x for x in inputs if x.requires_grad], threshold,
                          max_entries=max_entries, rng=rng)


def _away_from_zero(rng, shape, margin=0.1):
    x = rng.uniform(margin, 1.0, shape)
    return x * rng.choice([-1.0, 1.0], shape)


def op_checks(seed: int = 0) -> list[CheckResult]:
    """One check per differentiable op, plus the small layer compositions."""
    rng = np.random.default_rng(seed)
    n = rng.normal
    t = lambda a: Tensor(np.asarray(a, float), requires_grad=True)   # noqa: E731
    idx = rng.integers(0, 6, size=(4, 3))
    res = [
        check_op("add (broadcast)", ops.add, [n(size=(3, 4)), n(size=(4,))]),
        check_op("sub (broadcast)", ops.sub, [n(size=(2, 3, 1)), n(size=(3, 4))]),
        check_op("mul (broadcast)", ops.mul, [n(size=(3, 4)), n(size=(3, 1))]),
        check_op("sum", lambda x: ops.sum(x, axis=1), [n(size=(3, 4, 2))]),
        check_op("mean", ops.mean, [n(size=(5, 3))]),
        check_op("reshape", lambda x: ops.reshape(x, (6, 2)), [n(size=(3, 4))]),
        check_op("transpose", lambda x: ops.transpose(x, (2, 0, 1)), [n(size=(2, 3, 4))]),
        check_op("getitem", lambda x: ops.getitem(x, (slice(1, 3), [0, 2, 2])),
                 [n(size=(4, 3))]),
        check_op("take_rows", lambda x: ops.take_rows(x, idx), [n(size=(6, 2))]),
        check_op("concat", lambda a, b: ops.concat([a, b], axis=1),
                 [n(size=(3, 2)), n(size=(3, 4))]),
        check_op("stack", lambda a, b: ops.stack([a, b], axis=1),
                 [n(size=(3, 2)), n(size=(3, 2))]),
        check_op("leaky_relu", ops.leaky_relu, [_away_from_zero(rng, (4, 5))]),
        check_op("softmax", lambda x: ops.softmax(x, axis=1), [n(size=(3, 5))]),
        check_op("abs", ops.abs, [_away_from_zero(rng, (4, 3))]),
        check_op("l1_mean", ops.l1_mean,
                 [t(rng.normal(size=(3, 4))), Tensor(rng.normal(size=(3, 4)) + 3.0)]),
        check_op("matmul", ops.matmul, [n(size=(3, 4)), n(size=(4, 2))]),
        check_op("affine", ops.affine, [n(size=(5, 3)), n(size=(3, 4)), n(size=(4,))]),
        check_op("conv3x3", ops.conv3x3, [n(size=(2, 5, 4)), n(size=(3, 2, 3, 3)), n(size=(3,))]),
        check_op("place", lambda x: ops.place(x, (5, 6), (1, 2)), [n(size=(3, 3))]),
    ]

    views = rng.uniform(0, 1, (4, 3, 8, 2))
    disp = rng.uniform(-1.5, 1.5, (4, 3, 8))
    res.append(check_op("epi_gradient", lambda v: epi_gradient(v, disp, [0, 1, 3, 4]),
                        [views]))
    gt = rng.uniform(0, 1, views.shape)
    res.append(check_op("disparity_loss", lambda v: disparity_loss(v, gt, disp),
                        [views]))

    mlp_params = init_mlp(rng, "m", (5, 8, 8, 1))
    for p in mlp_params.values():
        p.requires_grad = True
    x = Tensor(n(size=(6, 5)), requires_grad=True)
    res.append(check_function(
        "mlp", lambda: ops.sum(mlp(mlp_params, "m", x, 3)), [x, *mlp_params.values()],
        rng=rng))

    blocks = init_resnet(rng, "r", 2, 3, 2, 2)
    for p in blocks.values():
        p.requires_grad = True
        if not p.data.any():
            p.data[...] = 0.3 * rng.normal(size=p.shape)
    z = Tensor(n(size=(3, 4, 4)), requires_grad=True)
    readout = rng.normal(size=(3, 4, 4))

    def two_blocks():
        h = residual_block(z, blocks, "r.block0")
        return ops.sum(ops.mul(residual_block(h, blocks, "r.block1"), readout))
    res.append(check_function("residual_block x2", two_blocks,
                              [z] + [v for k, v in blocks.items() if ".block" in k], rng=rng))
    return res


def small_setup(seed: int = 0):
    """A 4x4 training patch with F = 8 and halved widths (neighbourhoods up to 7)."""
    from .train import build_dataset
    arch = ArchConfig(features=8, fc_width=8, fr_width=8,
                      fw_hidden=(32, 32, 32), fb_hidden=(32, 32))
    warp = WarpConfig(d_max=1.0)
    cfg = Config(warp=warp, arch=arch, refine=RefineConfig(patch_size=4, stride=2),
                 train=TrainConfig(patch_size=4, disparity_source="gt+noise", seed=seed))
    lf = gen_scene(seed, U=5, H=8, W=8, d_max=1.0, n_layers=2).lightfield
    item = build_dataset([lf], cfg)[0]
    params = ModelParams(arch, warp, seed, "dynamic")
    rng = np.random.default_rng(seed + 1)
    for p in params.tensors.values():
        p.requires_grad = True
        if not p.data.any():
            # zero-initialised layers would hide the gradients of everything before them
            p.data[...] = 0.05 * rng.normal(size=p.shape)
    return item, (2, 6, 2, 6), params, cfg


def composed_checks(seed: int = 0, max_entries: int = 12) -> list[CheckResult]:
    """Full training loss of a small patch, checked per parameter group."""
    from .train import patch_loss
    item, region, params, cfg = small_setup(seed)
    rng = np.random.default_rng(seed)

    def loss_fn():
        return patch_loss(item, region, params, cfg)[0]

    out = []
    for group in ("fc", "fw", "fb", "fr"):
        tensors = list(params.group(group).values())
        out.append(check_function(f"pipeline loss / {group}", loss_fn, tensors, COMPOSED_TOL,
                                  max_entries=max_entries, rng=rng))
    return out


def run_all(seed: int = 0) -> list[CheckResult]:
    return op_checks(seed) + composed_checks(seed)


def format_table(results) -> str:
    lines = [f"{'check':<26}{'entries':>8}{'max rel err':>14}{'limit':>10}  result"]
    for r in results:
        lines.append(f"{r.name:<26}{r.n_entries:>8}{r.max_rel_err:>14.2e}{r.threshold:>10.0e}  "
                     f"{'ok' if r.passed else 'FAIL'}")
    return "\n".join(lines)
