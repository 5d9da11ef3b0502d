"""Desk-scale workbench for goal-directed exploration of simulated arm
environments with learned goal spaces.

The package simulates planar arm + ball scenes, parameterizes actions with
dynamic movement primitives, learns image goal spaces with a small VAE built
on an in-package autodiff core, and runs goal-exploration strategies whose
coverage can be measured, exported, and compared across seeds.
"""

__version__ = "0.1.0"

from .envs import ARM_2_BALLS, ARM_BALL, EnvConfig, Outcome, SceneState
from .dmp import DmpConfig, DmpParams
from .render import RenderConfig
from .vae import TrainConfig, VaeArchitecture
from .explore import ExplorationConfig, RunResult, STRATEGIES
from .config import ExperimentConfig, default_config
from .errors import ConfigError, NumericError, StateError

__all__ = [
    "__version__",
    "ARM_BALL",
    "ARM_2_BALLS",
    "EnvConfig",
    "SceneState",
    "Outcome",
    "DmpConfig",
    "DmpParams",
    "RenderConfig",
    "VaeArchitecture",
    "TrainConfig",
    "ExplorationConfig",
    "RunResult",
    "STRATEGIES",
    "ExperimentConfig",
    "default_config",
    "ConfigError",
    "NumericError",
    "StateError",
]
