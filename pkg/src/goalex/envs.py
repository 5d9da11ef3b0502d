"""Kinematic arm environments with a graspable ball.

Two variants are supported:

* ``ArmBall``: a 6-joint planar arm in the unit workspace. A ball sits on a
  fixed ring around the origin; once the arm tip comes within the grasp
  radius the ball sticks to the tip, constrained to the ring (only its
  angular position changes).
* ``Arm2Balls``: a 7-joint arm, a freely movable ball, plus a distractor
  ball that performs an independent random walk and can never be grasped.

Angles are relative: each joint angle is an offset from the previous link's
direction, so the tip position uses the cumulative sum of joint angles.
All positions live in [-1, 1] x [-1, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError

ARM_BALL = "ArmBall"
ARM_2_BALLS = "Arm2Balls"
VARIANTS = (ARM_BALL, ARM_2_BALLS)


@dataclass
class EnvConfig:
    variant: str = ARM_BALL
    n_joints: int = 6
    link_lengths: Tuple[float, ...] = ()
    joint_limits: Tuple[float, ...] = ()
    grasp_radius: float = 0.1
    ring_radius: float = 0.6
    ball_start_angle: float = math.pi / 2
    ball_start: Tuple[float, float] = (0.6, 0.6)
    distractor_start: Tuple[float, float] = (-0.6, 0.6)
    distractor_sigma: float = 0.05
    episode_steps: int = 50

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.n_joints < 1:
            raise ConfigError("n_joints must be >= 1")
        if not self.link_lengths:
            self.link_lengths = tuple([1.0 / self.n_joints] * self.n_joints)
        else:
            self.link_lengths = tuple(float(v) for v in self.link_lengths)
        if not self.joint_limits:
            self.joint_limits = tuple([math.pi / 2] * self.n_joints)
        else:
            self.joint_limits = tuple(float(v) for v in self.joint_limits)
        if len(self.link_lengths) != self.n_joints:
            raise ConfigError("link_lengths must have one entry per joint")
        if len(self.joint_limits) != self.n_joints:
            raise ConfigError("joint_limits must have one entry per joint")
        if any(l <= 0 for l in self.link_lengths):
            raise ConfigError("link lengths must be positive")
        if abs(sum(self.link_lengths) - 1.0) > 1e-9:
            raise ConfigError("link lengths must sum to 1 (fully stretched arm has unit reach)")
        if any(l <= 0 for l in self.joint_limits):
            raise ConfigError("joint limits must be positive")
        if self.grasp_radius <= 0:
            raise ConfigError("grasp_radius must be positive")
        if not (0.0 < self.ring_radius < 1.0):
            raise ConfigError("ring_radius must lie strictly inside (0, 1)")
        if self.distractor_sigma < 0:
            raise ConfigError("distractor_sigma must be >= 0")
        if self.episode_steps < 1:
            raise ConfigError("episode_steps must be >= 1")
        self.ball_start = (float(self.ball_start[0]), float(self.ball_start[1]))
        self.distractor_start = (float(self.distractor_start[0]), float(self.distractor_start[1]))

    @classmethod
    def default(cls, variant: str) -> "EnvConfig":
        """Canonical configuration for a variant (6 joints / 7 joints)."""
        if variant == ARM_BALL:
            return cls(variant=ARM_BALL, n_joints=6)
        if variant == ARM_2_BALLS:
            return cls(variant=ARM_2_BALLS, n_joints=7)
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")


@dataclass
class SceneState:
    joint_angles: np.ndarray
    ball_pos: np.ndarray
    grasped: bool
    distractor_pos: Optional[np.ndarray] = None

    def copy(self) -> "SceneState":
        return SceneState(
            joint_angles=self.joint_angles.copy(),
            ball_pos=self.ball_pos.copy(),
            grasped=self.grasped,
            distractor_pos=None if self.distractor_pos is None else self.distractor_pos.copy(),
        )


@dataclass
class Outcome:
    final_state: SceneState
    image: np.ndarray
    features: np.ndarray


def forward_kinematics(joint_angles: np.ndarray, link_lengths: Sequence[float]) -> np.ndarray:
    """Tip position of the arm, angles measured relative to the parent link."""
    angles = np.asarray(joint_angles, dtype=float)
    lengths = np.asarray(link_lengths, dtype=float)
    if angles.shape != lengths.shape:
        raise ConfigError("joint_angles and link_lengths must have matching length")
    absolute = np.cumsum(angles)
    x = float(np.sum(lengths * np.cos(absolute)))
    y = float(np.sum(lengths * np.sin(absolute)))
    return np.array([x, y])


def joint_positions(joint_angles: np.ndarray, link_lengths: Sequence[float]) -> np.ndarray:
    """Positions of the base and every joint, shape (n_joints + 1, 2)."""
    angles = np.asarray(joint_angles, dtype=float)
    lengths = np.asarray(link_lengths, dtype=float)
    absolute = np.cumsum(angles)
    xs = np.concatenate([[0.0], np.cumsum(lengths * np.cos(absolute))])
    ys = np.concatenate([[0.0], np.cumsum(lengths * np.sin(absolute))])
    return np.stack([xs, ys], axis=1)


def initial_state(config: EnvConfig) -> SceneState:
    """Deterministic start: arm stretched along +x, ball at its rest position."""
    if config.variant == ARM_BALL:
        ball = config.ring_radius * np.array(
            [math.cos(config.ball_start_angle), math.sin(config.ball_start_angle)]
        )
        distractor = None
    else:
        ball = np.array(config.ball_start, dtype=float)
        distractor = np.array(config.distractor_start, dtype=float)
    return SceneState(
        joint_angles=np.zeros(config.n_joints),
        ball_pos=ball,
        grasped=False,
        distractor_pos=distractor,
    )


def distractor_step(pos: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """One random-walk step, clipped to the workspace.

    Always draws exactly two normal samples so the stream layout does not
    depend on sigma or on anything the arm does.
    """
    step = sigma * rng.standard_normal(2)
    return np.clip(pos + step, -1.0, 1.0)


def step(
    state: SceneState,
    joint_angles: np.ndarray,
    config: EnvConfig,
    rng: Optional[np.random.Generator] = None,
) -> SceneState:
    """Advance one tick: move the arm to the commanded angles, update the ball.

    The grasp is sticky: once the tip has been within grasp_radius of the
    ball, the ball follows the tip for the rest of the episode. In ArmBall
    the ball is constrained to the ring, so a grasped ball moves to the ring
    point at the tip's angular position; in Arm2Balls it rides at the tip.
    """
    angles = np.asarray(joint_angles, dtype=float)
    if angles.shape != (config.n_joints,):
        raise ConfigError(f"expected {config.n_joints} joint angles, got shape {angles.shape}")
    limits = np.asarray(config.joint_limits)
    angles = np.clip(angles, -limits, limits)
    tip = forward_kinematics(angles, config.link_lengths)

    grasped = state.grasped or float(np.hypot(*(tip - state.ball_pos))) <= config.grasp_radius
    ball = state.ball_pos.copy()
    if grasped:
        if config.variant == ARM_BALL:
            if float(np.hypot(tip[0], tip[1])) > 1e-12:
                phi = math.atan2(tip[1], tip[0])
            else:
                phi = math.atan2(state.ball_pos[1], state.ball_pos[0])
            ball = config.ring_radius * np.array([math.cos(phi), math.sin(phi)])
        else:
            ball = np.clip(tip, -1.0, 1.0)

    distractor = None
    if config.variant == ARM_2_BALLS:
        if rng is None:
            raise ConfigError("Arm2Balls requires an rng for the distractor walk")
        distractor = distractor_step(state.distractor_pos, config.distractor_sigma, rng)

    return SceneState(joint_angles=angles, ball_pos=ball, grasped=grasped, distractor_pos=distractor)


def rollout(
    config: EnvConfig,
    joint_trajectory: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    render_config=None,
    start: Optional[SceneState] = None,
) -> Outcome:
    """Run a full episode from the fixed initial state and summarize the end.

    joint_trajectory has shape (episode_steps, n_joints); each row is the
    commanded joint configuration for one tick.
    """
    from .render import RenderConfig, render

    traj = np.asarray(joint_trajectory, dtype=float)
    if traj.ndim != 2 or traj.shape != (config.episode_steps, config.n_joints):
        raise ConfigError(
            f"trajectory shape {traj.shape} does not match "
            f"(episode_steps={config.episode_steps}, n_joints={config.n_joints})"
        )
    state = initial_state(config) if start is None else start.copy()
    for row in traj:
        state = step(state, row, config, rng)
    rcfg = render_config if render_config is not None else RenderConfig()
    image = render(state, rcfg, link_lengths=config.link_lengths)
    return Outcome(final_state=state, image=image, features=engineered_features(state, config))


def engineered_features(state: SceneState, config: EnvConfig) -> np.ndarray:
    """Hand-picked outcome features.

    ArmBall: (tip_x, tip_y, ball_radius, ball_angle) with the angle wrapped
    to [0, 2*pi); the wrap discontinuity is kept on purpose, goal-space
    learning has to cope with it. Arm2Balls: cartesian tip, ball and
    distractor positions.
    """
    tip = forward_kinematics(state.joint_angles, config.link_lengths)
    if config.variant == ARM_BALL:
        r = float(np.hypot(state.ball_pos[0], state.ball_pos[1]))
        phi = math.atan2(state.ball_pos[1], state.ball_pos[0]) % (2.0 * math.pi)
        return np.array([tip[0], tip[1], r, phi])
    return np.concatenate([tip, state.ball_pos, state.distractor_pos])


def feature_names(config: EnvConfig) -> Tuple[str, ...]:
    if config.variant == ARM_BALL:
        return ("tip_x", "tip_y", "ball_radius", "ball_angle")
    return ("tip_x", "tip_y", "ball_x", "ball_y", "distractor_x", "distractor_y")


def feature_bounds(config: EnvConfig) -> np.ndarray:
    """Per-feature (low, high) box used when goals are drawn in this space."""
    if config.variant == ARM_BALL:
        r = config.ring_radius
        return np.array([[-1.0, 1.0], [-1.0, 1.0], [r, r], [0.0, 2.0 * math.pi]])
    return np.array([[-1.0, 1.0]] * 6)


def feature_dim(config: EnvConfig) -> int:
    return 4 if config.variant == ARM_BALL else 6
