"""Adam optimizer with bias-corrected moment estimates, updating in place."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..errors import ConfigError
from .core import Tensor


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")


def adam_step(state: AdamState, params: Sequence[Tensor]) -> None:
    """One update over `params` using their accumulated .grad fields.

    A missing gradient counts as zero, so untouched parameters stay put
    (their moments stay at zero as well). Parameter order must be stable
    across calls; the moment buffers are keyed by position.
    """
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(params) != len(state.m):
        raise ConfigError(f"optimizer tracks {len(state.m)} parameters, got {len(params)}")
    state.step_count += 1
    t = state.step_count
    m_corr = 1.0 - state.beta1**t
    v_corr = 1.0 - state.beta2**t
    for p, m, v in zip(params, state.m, state.v):
        if m.shape != p.data.shape:
            raise ConfigError(f"parameter shape {p.data.shape} does not match moment shape {m.shape}")
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.learning_rate * (m / m_corr) / (np.sqrt(v / v_corr) + state.epsilon)
