"""The desk-scale dynamic-vs-baseline comparison, driven through the CLI.

Eight oracle scenes are used for training and two held-out scenes for
validation.  Both modes are trained with the same seed and step count, then
every validation scene is reconstructed with and without refinement.
Everything lands under one work directory so two runs can be compared
byte for byte.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cli import main

TRAIN_SEED = 0
VAL_SEED = 100
MODES = ("dynamic", "baseline")


@dataclass
class ExperimentSettings:
    steps: int = 1000
    seed: int = 0
    n_train: int = 8
    n_val: int = 2
    size: int = 64
    views: int = 5
    layers: int = 2
    d_max: float = 3.0
    noise_sigma: float = 0.5
    threads: int = 1

    def config(self) -> dict:
        return {"warp": {"d_max": self.d_max},
                "train": {"max_steps": self.steps, "seed": self.seed,
                          "ckpt_every": max(1, self.steps // 4),
                          "disparity_source": "gt+noise", "noise_sigma": self.noise_sigma}}


@dataclass
class ExperimentResult:
    root: Path
    psnr: dict = field(default_factory=dict)      # (mode, refine) -> per-view PSNR list
    ssim: dict = field(default_factory=dict)
    train_seconds: dict = field(default_factory=dict)
    seconds: float = 0.0

    def avg(self, mode: str, refine: bool = True) -> float:
        return float(np.mean(self.psnr[mode, refine]))

    def log(self, mode: str) -> list[dict]:
        path = self.root / mode / "train_log.jsonl"
        return [json.loads(line) for line in path.read_text().splitlines()]

    def checkpoint(self, mode: str) -> Path:
        return self.root / mode / "model.ckpt"


def _cli(settings: ExperimentSettings, cfg_path: Path, out, *args) -> None:
    argv = ["--seed", str(settings.seed), "--threads", str(settings.threads),
            "--config", str(cfg_path), "--out", str(out), *map(str, args)]
    code = main(argv)
    if code != 0:
        raise RuntimeError(f"dynlf {' '.join(argv)} exited with {code}")


def _synth(settings, cfg_path, out, seed: int, n: int) -> None:
    argv = ["--seed", str(seed), "--out", str(out), "synth", "--scenes", str(n),
            "--views", str(settings.views), "--height", str(settings.size),
            "--width", str(settings.size), "--layers", str(settings.layers),
            "--dmax", str(settings.d_max)]
    if main(argv) != 0:
        raise RuntimeError("scene synthesis failed")


def run_experiment(root, settings: ExperimentSettings | None = None) -> ExperimentResult:
    """Generate data, train both modes and evaluate them under ``root``."""
    settings = settings or ExperimentSettings()
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(settings.config(), indent=2))
    _synth(settings, cfg_path, root / "train", TRAIN_SEED, settings.n_train)
    _synth(settings, cfg_path, root / "val", VAL_SEED, settings.n_val)

    res = ExperimentResult(root)
    for mode in MODES:
        t0 = time.perf_counter()
        _cli(settings, cfg_path, root / mode, "train", root / "train", "--mode", mode)
        res.train_seconds[mode] = time.perf_counter() - t0

    for mode in MODES:
        for refine in (True, False):
            res.psnr[mode, refine], res.ssim[mode, refine] = [], []
            for k in range(settings.n_val):
                scene = root / "val" / f"scene_{VAL_SEED + k:04d}"
                out = root / "recon" / f"{mode}_{'full' if refine else 'norefine'}_{k}"
                extra = [] if refine else ["--no-refine"]
                _cli(settings, cfg_path, out, "reconstruct", scene, "--mode", mode,
                     "--ckpt", res.checkpoint(mode), "--disparity", "gt+noise",
                     "--no-intermediates", *extra)
                views = json.loads((out / "metrics.json").read_text())["views"]
                res.psnr[mode, refine] += [v["psnr"] for v in views]
                res.ssim[mode, refine] += [v["ssim"] for v in views]
    res.seconds = time.perf_counter() - start
    return res
