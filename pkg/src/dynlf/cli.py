"""Command-line entry point: ``dynlf <command> ...``.

Commands::

    synth        render oracle scenes into light-field containers
    train        fit a model on containers that carry disparity maps
    reconstruct  synthesise novel views from two source views
    eval         PSNR/SSIM of a reconstruction against ground truth
    gradcheck    finite-difference check of every differentiable op
    epi          export an epipolar plane image as PNG
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import Config
from .io import load_lf, save_lf, write_pfm, write_png16
from .lightfield import LightField, SparseInput, extract_epi
from .metrics import MetricReport, psnr, ssim
from .model import ModelParams
from .pipeline import Scene, reconstruct
from .train import build_dataset, source_disparities, train

log = logging.getLogger("dynlf")
EPI_SCALE = 8


def _containers(paths) -> list[Path]:
    """Expand each path to itself (a container) or the containers directly inside it."""
    out = []
    for p in map(Path, paths):
        if (p / "manifest.json").exists():
            out.append(p)
            continue
        found = sorted(q.parent for q in p.glob("*/manifest.json"))
        if not found:
            raise FileNotFoundError(f"{p} is not a light-field container and holds none")
        out.extend(found)
    return out


def _position(lf: LightField, u: int) -> int:
    try:
        return lf.indices.index(u)
    except ValueError:
        raise ValueError(f"view u={u} is not in the container "
                         f"(has {lf.indices})") from None


# --- synth -------------------------------------------------------------------

def run_synth(args, cfg: Config) -> int:
    from .oracle import gen_scene
    out = Path(args.out)
    for k in range(args.scenes):
        seed = args.seed + k
        sc = gen_scene(seed, args.views, args.height, args.width, d_max=args.dmax,
                       n_layers=args.layers, channels=args.channels,
                       integer_disparity=args.integer)
        root = save_lf(sc.lightfield, out / f"scene_{seed:04d}", fmt=args.format)
        for u in range(sc.U):
            write_pfm(root / f"gt_disparity_{u:02d}.pfm", sc.gt_disparity[u])
            for s in range(sc.U):
                if s != u:
                    write_png16(root / f"occlusion_{u:02d}_{s:02d}.png",
                                sc.occlusion_mask(u, s).astype(np.float64))
        log.info("wrote %s", root)
    return 0


# --- train -------------------------------------------------------------------

def run_train(args, cfg: Config) -> int:
    tc = cfg.train
    if args.mode:
        tc.mode = args.mode
    if args.steps is not None:
        tc.max_steps = args.steps
    if args.ckpt_every is not None:
        tc.ckpt_every = args.ckpt_every
    if args.seed is not None:
        tc.seed = args.seed
    lfs = [load_lf(p) for p in _containers(args.data)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    params, records = train(build_dataset(lfs, cfg), cfg, log_path=out / "train_log.jsonl",
                            ckpt_dir=out / "checkpoints")
    params.save(out / "model.ckpt")
    if records:
        log.info("final loss %.5f after %d steps", records[-1]["total"], len(records))
    return 0


# --- reconstruct / eval ------------------------------------------------------

def _view_metrics(pred, gt, threads: int):
    def one(pair):
        a, b = pair
        return psnr(a, b), ssim(a, b)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, zip(pred, gt)))
    return [one(p) for p in zip(pred, gt)]


def run_reconstruct(lf_path, checkpoint, mode: str, targets, out, sources=(0, 4),
                    refine: bool = True, disparity: str = "gt", seed: int = 0,
                    config: Config | None = None, intermediates: bool = True,
                    threads: int = 1) -> MetricReport:
    """Synthesise ``targets`` of the container at ``lf_path`` into ``out``.

    Writes a container with the sources and the synthesised views,
    ``metrics.json``, and (optionally) per-source syntheses, confidence maps
    and the blended view under ``out/intermediate``.  Views missing from the
    input container get no metrics.
    """
    cfg = config or Config()
    report = MetricReport(mode)
    out = Path(out)
    targets = [int(t) for t in targets]
    if not targets:
        return report
    lf = load_lf(lf_path)
    params = ModelParams.load(checkpoint) if checkpoint else None
    warp = params.warp if params else cfg.warp
    pos = [_position(lf, s) for s in sources]
    if disparity == "gt" and lf.disparities is None:
        raise ValueError("container has no disparity maps; use --disparity blockmatch")
    sub = LightField(lf.views[pos], None if lf.disparities is None else lf.disparities[pos],
                     lf.dmax)
    disp = source_disparities(sub, (0, 1), disparity, cfg.train.noise_sigma, seed, warp.d_max)
    inputs = SparseInput(tuple(sources), tuple(lf.views[p] for p in pos), disp)
    scene = Scene(inputs, warp)
    results = reconstruct(inputs, targets, params, params.arch if params else cfg.arch, warp,
                          cfg.refine, mode, refine, scene=scene)

    out.mkdir(parents=True, exist_ok=True)
    order = sorted(set(sources) | set(targets))
    views = [results[u].final.data if u in results else inputs.views[sources.index(u)]
             for u in order]
    save_lf(LightField(np.stack(views), None, lf.dmax, order), out)
    if intermediates:
        inter = out / "intermediate"
        inter.mkdir(exist_ok=True)
        for t, r in results.items():
            for s, img, c in zip(sources, r.per_source, r.confidences):
                write_png16(inter / f"from_{s:02d}_to_{t:02d}.png", np.clip(img.data, 0, 1))
                write_pfm(inter / f"confidence_{s:02d}_to_{t:02d}.pfm", c.data)
            write_png16(inter / f"blended_{t:02d}.png", np.clip(r.blended.data, 0, 1))

    have = [t for t in targets if t in lf.indices]
    scores = dict(zip(have, _view_metrics([np.clip(results[t].final.data, 0, 1) for t in have],
                                          [lf.views[_position(lf, t)] for t in have], threads)))
    for t in targets:
        p, s = scores.get(t, (None, None))
        report.add(t, p, s, results[t].seconds)
    (out / "metrics.json").write_text(report.to_json())
    return report


def run_eval(pred_path, gt_path, mode: str = "dynamic", targets=None, threads: int = 1,
             timings=None) -> MetricReport:
    """Per-view PSNR/SSIM of container ``pred_path`` against ``gt_path``."""
    pred, gt = load_lf(pred_path), load_lf(gt_path)
    if pred.shape != gt.shape:
        raise ValueError(f"view shapes differ: {pred.shape} vs {gt.shape}")
    if targets is None:
        targets = [u for u in pred.indices if u in gt.indices]
    timings = timings or {}
    pairs = _view_metrics([pred.views[_position(pred, u)] for u in targets],
                          [gt.views[_position(gt, u)] for u in targets], threads)
    report = MetricReport(mode)
    for u, (p, s) in zip(targets, pairs):
        report.add(u, p, s, timings.get(u, 0.0))
    return report


def _timings(path) -> dict:
    m = Path(path) / "metrics.json"
    if not m.exists():
        return {}
    return {v["u"]: v["seconds"] for v in json.loads(m.read_text()).get("views", [])}


# --- epi ---------------------------------------------------------------------

def export_epi(lf: LightField, y: int, path, scale: int = EPI_SCALE) -> np.ndarray:
    """Write the EPI at row ``y`` as a PNG with each view row repeated ``scale`` times."""
    img = np.repeat(extract_epi(lf, y), scale, axis=0)
    write_png16(path, img)
    return img


# --- argument parsing --------------------------------------------------------

def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()] if text else []


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynlf", description=__doc__.split("\n")[0])
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--threads", type=int, default=1, help="BLAS / metric threads")
    p.add_argument("--out", default="out", help="output directory or file")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="render oracle scenes")
    s.add_argument("--scenes", type=int, default=1)
    s.add_argument("--views", type=int, default=5)
    s.add_argument("--height", type=int, default=64)
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--layers", type=int, default=2)
    s.add_argument("--channels", type=int, default=3, choices=(1, 3))
    s.add_argument("--dmax", type=float, default=2.0)
    s.add_argument("--integer", action="store_true", help="integer layer disparities")
    s.add_argument("--format", default="pfm", choices=("pfm", "png"))

    t = sub.add_parser("train", help="train a model")
    t.add_argument("data", nargs="+", help="containers or directories of containers")
    t.add_argument("--mode", choices=("dynamic", "baseline"))
    t.add_argument("--steps", type=int)
    t.add_argument("--ckpt-every", type=int)

    r = sub.add_parser("reconstruct", help="synthesise novel views")
    r.add_argument("lightfield")
    r.add_argument("--ckpt", help="model checkpoint (optional in baseline mode)")
    r.add_argument("--mode", default="dynamic", choices=("dynamic", "baseline"))
    r.add_argument("--sources", default="0,4")
    r.add_argument("--targets", default="1,2,3")
    r.add_argument("--disparity", default="gt", choices=("gt", "gt+noise", "blockmatch"))
    r.add_argument("--no-refine", action="store_true")
    r.add_argument("--no-intermediates", action="store_true")

    e = sub.add_parser("eval", help="compare a reconstruction with ground truth")
    e.add_argument("prediction")
    e.add_argument("ground_truth")
    e.add_argument("--mode", default="dynamic", choices=("dynamic", "baseline"))
    e.add_argument("--targets", help="comma-separated view indices (default: all shared)")

    sub.add_parser("gradcheck", help="finite-difference gradient checks")

    x = sub.add_parser("epi", help="export an EPI image")
    x.add_argument("lightfield")
    x.add_argument("--row", type=int, required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = Config.load(args.config) if args.config else Config()
    seed = 0 if args.seed is None else args.seed
    limits = threadpool_limits(args.threads) if args.threads else contextlib.nullcontext()
    try:
        with limits:
            return _dispatch(args, cfg, seed)
    except (OSError, ValueError, IndexError) as exc:
        log.error("%s", exc)
        return 2


def _dispatch(args, cfg: Config, seed: int) -> int:
    if args.command == "synth":
        args.seed = seed
        return run_synth(args, cfg)
    if args.command == "train":
        return run_train(args, cfg)
    if args.command == "reconstruct":
        if args.mode == "dynamic" and not args.ckpt:
            raise ValueError("dynamic mode needs --ckpt")
        rep = run_reconstruct(args.lightfield, args.ckpt, args.mode, _ints(args.targets),
                              args.out, tuple(_ints(args.sources)), not args.no_refine,
                              args.disparity, seed, cfg, not args.no_intermediates,
                              args.threads)
        print(rep.to_json())
        return 0
    if args.command == "eval":
        targets = _ints(args.targets) if args.targets else None
        rep = run_eval(args.prediction, args.ground_truth, args.mode, targets, args.threads,
                       _timings(args.prediction))
        out = Path(args.out)
        if out.suffix != ".json":
            out.mkdir(parents=True, exist_ok=True)
            out = out / "eval.json"
        out.write_text(rep.to_json())
        print(rep.to_json())
        return 0
    if args.command == "gradcheck":
        from .gradcheck import format_table, run_all
        results = run_all(seed)
        print(format_table(results))
        return 0 if all(r.passed for r in results) else 1
    if args.command == "epi":
        out = Path(args.out)
        if out.suffix != ".png":
            out.mkdir(parents=True, exist_ok=True)
            out = out / f"epi_row{args.row:03d}.png"
        export_epi(load_lf(args.lightfield), args.row, out)
        print(out)
        return 0
    raise AssertionError(args.command)


if __name__ == "__main__":
    sys.exit(main())
