"""Light-field view synthesis with learned, content-adaptive interpolation weights.

The package is organised around a 3-D light field (views on a horizontal
line).  Two source views plus their disparity maps are turned into the
missing views by

* per-pixel learned interpolation over a geometry-derived neighbourhood
  (``interp``), or fixed-kernel warping in baseline mode (``warp``),
* confidence-weighted blending of the two per-source syntheses,
* patch-wise residual refinement guided by the target disparity (``refine``).

Everything trainable runs on the small reverse-mode autodiff engine in
``dynlf.nn``.  ``dynlf.oracle`` renders layered scenes with exact ground truth
for testing and training.
"""
from .config import ArchConfig, Config, RefineConfig, TrainConfig
from .lightfield import LightField, SparseInput, extract_epi, to_luma
from .metrics import MetricReport, psnr, ssim
from .model import ModelParams
from .oracle import SceneOracle, gen_scene
from .pipeline import reconstruct
from .warp import WarpConfig, backward_warp

__version__ = "0.1.0"

__all__ = [
    "ArchConfig", "Config", "LightField", "MetricReport", "ModelParams", "RefineConfig",
    "SceneOracle", "SparseInput", "TrainConfig", "WarpConfig", "backward_warp",
    "extract_epi", "gen_scene", "psnr", "reconstruct", "ssim", "to_luma",
]
