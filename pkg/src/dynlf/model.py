"""Learnable parameters of the reconstruction networks.

Four groups share one flat name space:

* ``fc.*`` content feature CNN (residual blocks)
* ``fw.*`` interpolation-weight MLP (dynamic mode only)
* ``fb.*`` confidence MLP
* ``fr.*`` refinement CNN, whose tail starts at zero
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .config import ArchConfig, max_neighbors
from .nn import Tensor, load_checkpoint, save_checkpoint
from .nn.layers import init_mlp, init_resnet
from .warp import WarpConfig

GROUPS = ("fc", "fw", "fb", "fr")


class ModelParams:
    def __init__(self, arch: ArchConfig | None = None, warp: WarpConfig | None = None,
                 seed: int = 0, mode: str = "dynamic"):
        if mode not in ("dynamic", "baseline"):
            raise ValueError(f"unknown mode {mode!r}")
        self.arch = arch or ArchConfig()
        self.warp = warp or WarpConfig()
        self.seed = seed
        self.mode = mode
        a = self.arch
        # one RNG stream per group so both modes share fc/fb/fr initialisation
        rngs = dict(zip(GROUPS, (np.random.default_rng(s)
                                 for s in np.random.SeedSequence(seed).spawn(len(GROUPS)))))
        t = {}
        t.update(init_resnet(rngs["fc"], "fc", 2 * a.channels + 1, a.fc_width, a.features,
                             a.res_blocks))
        if mode == "dynamic":
            t.update(init_mlp(rngs["fw"], "fw", (a.embed_dim, *a.fw_hidden, 1)))
        t.update(init_mlp(rngs["fb"], "fb",
                          (self.k_max * a.embed_dim, *a.fb_hidden, 1)))
        t.update(init_resnet(rngs["fr"], "fr", 3 * a.channels, a.fr_width, a.channels,
                             a.res_blocks, zero_out=True))
        self.tensors: dict[str, Tensor] = t

    @property
    def k_max(self) -> int:
        return max_neighbors(self.arch, self.warp)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name):
        return name in self.tensors

    def group(self, prefix: str) -> dict[str, Tensor]:
        return {k: v for k, v in self.tensors.items() if k.split(".")[0] == prefix}

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.tensors.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.tensors) - set(state)
        extra = set(state) - set(self.tensors)
        if missing or extra:
            raise ValueError(f"parameter mismatch: missing {sorted(missing)}, "
                             f"unexpected {sorted(extra)}")
        for k, v in state.items():
            if v.shape != self.tensors[k].shape:
                raise ValueError(f"{k}: shape {v.shape} != {self.tensors[k].shape}")
            self.tensors[k].data = np.array(v, dtype=np.float64)

    def n_parameters(self) -> int:
        return sum(v.data.size for v in self.tensors.values())

    def meta(self) -> dict:
        return {"mode": self.mode, "seed": self.seed,
                "arch": dataclasses.asdict(self.arch), "warp": dataclasses.asdict(self.warp)}

    def save(self, path) -> None:
        save_checkpoint(path, self.state_dict(), self.meta())

    @classmethod
    def load(cls, path) -> "ModelParams":
        state, meta = load_checkpoint(path)
        model = cls(ArchConfig(**meta["arch"]), WarpConfig(**meta["warp"]),
                    meta.get("seed", 0), meta.get("mode", "dynamic"))
        model.load_state_dict(state)
        return model
