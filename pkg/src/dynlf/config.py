"""Configuration dataclasses and their JSON form.

A config file has up to four sections, each mirroring one dataclass::

    {"warp": {"d_max": 2.0}, "arch": {"features": 16},
     "refine": {"patch_size": 32}, "train": {"max_steps": 1000}}

Unknown sections or keys are rejected.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .warp import WarpConfig


@dataclass
class ArchConfig:
    channels: int = 3
    features: int = 16          # content feature channels per source pixel
    fc_width: int = 16
    fr_width: int = 16
    res_blocks: int = 4
    fw_hidden: tuple = (64, 64, 64)
    fb_hidden: tuple = (64, 64)
    max_offset: int = 3         # largest |s - t| the confidence net accepts
    normalize_weights: bool = True
    normalize_confidence: bool = True
    slope: float = 0.1

    def __post_init__(self):
        self.fw_hidden = tuple(self.fw_hidden)
        self.fb_hidden = tuple(self.fb_hidden)
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        if min(self.features, self.fc_width, self.fr_width, self.max_offset) < 1:
            raise ValueError("network sizes must be positive")

    @property
    def embed_dim(self) -> int:
        # disparity, raw offset, normalised offset, angular offset, content
        return 4 + self.features


def max_neighbors(arch: ArchConfig, warp: WarpConfig) -> int:
    return 2 * max(0, math.ceil(warp.d_max * arch.max_offset - 1e-9)) + 1


@dataclass
class RefineConfig:
    enabled: bool = True
    patch_size: int = 32
    stride: int = 16

    def __post_init__(self):
        if self.patch_size < 1 or self.stride < 1:
            raise ValueError("patch size and stride must be positive")


@dataclass
class TrainConfig:
    mode: str = "dynamic"
    patch_size: int = 32
    batch_size: int = 1
    lr_initial: float = 1e-4
    lr_after_drop: float = 1e-5
    drop_at_step: int | None = None     # default: 80% of max_steps
    max_steps: int = 2000
    lam: float = 0.1
    seed: int = 0
    sources: tuple = (0, 4)
    targets: tuple = (1, 2, 3)
    disparity_source: str = "gt"        # gt | gt+noise | blockmatch
    noise_sigma: float = 0.5
    resample_noise: bool = True         # fresh gt+noise draw every step
    shear_augment: bool = True          # random integer disparity offset per step
    ckpt_every: int = 0

    def __post_init__(self):
        self.sources = tuple(self.sources)
        self.targets = tuple(self.targets)
        if self.mode not in ("dynamic", "baseline"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.disparity_source not in ("gt", "gt+noise", "blockmatch"):
            raise ValueError(f"unknown disparity source {self.disparity_source!r}")
        if self.patch_size < 1 or self.batch_size != 1:
            raise ValueError("patch_size must be positive and batch_size must be 1")
        if self.lr_initial <= 0 or self.lr_after_drop <= 0 or self.max_steps < 0:
            raise ValueError("learning rates must be positive and max_steps non-negative")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")

    @property
    def drop_step(self) -> int:
        if self.drop_at_step is not None:
            return self.drop_at_step
        return int(round(0.8 * self.max_steps))


@dataclass
class Config:
    warp: WarpConfig = field(default_factory=WarpConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        sections = {f.name: f.type for f in dataclasses.fields(cls)}
        unknown = set(data) - set(sections)
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        kinds = {"warp": WarpConfig, "arch": ArchConfig, "refine": RefineConfig,
                 "train": TrainConfig}
        built = {}
        for name, values in data.items():
            kind = kinds[name]
            allowed = {f.name for f in dataclasses.fields(kind)}
            bad = set(values) - allowed
            if bad:
                raise ValueError(f"unknown keys in [{name}]: {sorted(bad)}")
            built[name] = kind(**values)
        return cls(**built)

    @classmethod
    def load(cls, path) -> "Config":
        return cls.from_dict(json.loads(Path(path).read_text()))
