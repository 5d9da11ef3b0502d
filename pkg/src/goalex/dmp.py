"""Dynamic movement primitives: a compact parameterization of joint trajectories.

Each joint is driven by a spring-damper system pulled toward a goal angle and
perturbed by a learnable forcing term, all paced by a shared phase variable
that decays from 1 toward 0:

    tau * dy2 = alpha * (beta * (g - y) - dy) + s * f(s)
    tau * ds  = -alpha_s * s

The forcing term is a normalized radial-basis mix, f(s) = scale * sum_i(w_i *
psi_i(s)) / sum_i(psi_i(s)). A joint contributes n_basis weights plus one
goal parameter, so an arm with J joints takes J * (n_basis + 1) parameters,
all kept in [-1, 1]. Integration is plain forward Euler with dt = tau / T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .envs import EnvConfig
from .errors import ConfigError

PARAMS_PER_JOINT_BASIS = 1  # the goal is the single extra parameter per joint


@dataclass
class DmpConfig:
    n_basis: int = 7
    alpha: float = 25.0
    beta: float = 25.0 / 4.0
    alpha_s: float = 3.0
    tau: float = 1.0
    weight_scale: float = 200.0
    centers: Tuple[float, ...] = ()
    widths: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.n_basis < 2:
            raise ConfigError("n_basis must be >= 2")
        if self.alpha <= 0 or self.beta <= 0 or self.alpha_s <= 0:
            raise ConfigError("alpha, beta and alpha_s must be positive")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if not self.centers:
            # Basis peaks equally spaced in time; under exponential phase decay
            # that means centers exp(-alpha_s * t_i / tau) for t_i = i*tau/(n-1).
            ts = np.linspace(0.0, 1.0, self.n_basis)
            self.centers = tuple(np.exp(-self.alpha_s * ts))
        if not self.widths:
            # Neighboring kernels intersect at activation 0.5.
            c = np.asarray(self.centers)
            gaps = np.abs(np.diff(c))
            w = 4.0 * math.log(2.0) / gaps**2
            self.widths = tuple(np.concatenate([w, w[-1:]]))
        self.centers = tuple(float(v) for v in self.centers)
        self.widths = tuple(float(v) for v in self.widths)
        if len(self.centers) != self.n_basis or len(self.widths) != self.n_basis:
            raise ConfigError("centers and widths must each have n_basis entries")
        if any(w <= 0 for w in self.widths):
            raise ConfigError("kernel widths must be positive")


def param_dim(n_joints: int, config: Optional[DmpConfig] = None) -> int:
    """Flat parameter count: per joint, n_basis forcing weights plus a goal."""
    n_basis = 7 if config is None else config.n_basis
    return n_joints * (n_basis + PARAMS_PER_JOINT_BASIS)


@dataclass
class DmpParams:
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.clip(np.asarray(self.values, dtype=float).ravel(), -1.0, 1.0)

    def per_joint(self, n_joints: int, config: DmpConfig) -> Tuple[np.ndarray, np.ndarray]:
        """Split the flat vector into (weights [J, n_basis], goals [J])."""
        expected = param_dim(n_joints, config)
        if self.values.shape[0] != expected:
            raise ConfigError(
                f"got {self.values.shape[0]} parameters, expected {expected} "
                f"for {n_joints} joints with {config.n_basis} basis functions"
            )
        table = self.values.reshape(n_joints, config.n_basis + 1)
        return table[:, : config.n_basis], table[:, config.n_basis]


def random_params(n_joints: int, rng: np.random.Generator, config: Optional[DmpConfig] = None) -> DmpParams:
    return DmpParams(rng.uniform(-1.0, 1.0, size=param_dim(n_joints, config)))


def basis_activations(s: float, config: DmpConfig) -> np.ndarray:
    """Kernel activations at phase s. The phase is positive by construction."""
    if s <= 0:
        raise ConfigError(f"phase must be positive, got {s}")
    c = np.asarray(config.centers)
    w = np.asarray(config.widths)
    return np.exp(-w * (s - c) ** 2)


def integrate(
    params: DmpParams,
    start_angles: np.ndarray,
    config: DmpConfig,
    env_config: EnvConfig,
) -> np.ndarray:
    """Roll the primitive forward and return the commanded joint trajectory.

    Returns shape (episode_steps, n_joints); every row is already clipped to
    the joint limits, matching what the environment will actually execute.
    Goal parameters are interpreted as fractions of the joint limit.
    """
    y0 = np.asarray(start_angles, dtype=float)
    if y0.shape != (env_config.n_joints,):
        raise ConfigError(f"start_angles must have shape ({env_config.n_joints},)")
    weights, goal_frac = params.per_joint(env_config.n_joints, config)
    limits = np.asarray(env_config.joint_limits)
    goals = goal_frac * limits

    steps = env_config.episode_steps
    dt = config.tau / steps
    y = y0.copy()
    dy = np.zeros_like(y)
    s = 1.0
    out = np.empty((steps, env_config.n_joints))
    for t in range(steps):
        psi = basis_activations(s, config)
        forcing = config.weight_scale * (weights @ psi) / float(np.sum(psi))
        ddy = (config.alpha * (config.beta * (goals - y) - dy) + s * forcing) / config.tau
        y = y + dt * dy
        dy = dy + dt * ddy
        s = s + dt * (-config.alpha_s * s / config.tau)
        out[t] = np.clip(y, -limits, limits)
    return out
