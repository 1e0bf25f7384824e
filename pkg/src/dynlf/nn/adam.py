from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class StepSchedule:
    """Piecewise-constant learning rate: ``initial`` until ``drop_at``, then ``after``."""

    initial: float = 1e-4
    after: float = 1e-5
    drop_at: int | None = None

    def __call__(self, step: int) -> float:
        if self.drop_at is not None and step >= self.drop_at:
            return self.after
        return self.initial


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    schedule: StepSchedule = field(default_factory=StepSchedule)
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> float:
    """Update ``params`` (name -> Tensor) in place from ``grads`` (name -> array).

    Parameters without an entry in ``grads`` are treated as having zero
    gradient.  Returns the learning rate that was used.
    """
    lr = state.schedule(state.step)
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, expected {p.data.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data = p.data - update
    return lr
