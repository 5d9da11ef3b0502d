"""Experiment configuration: typed blocks with a text round-trip.

Configs serialize to the classic ``key = value`` section format and parse
back to an equal object (parse(serialize(c)) == c), which is what makes
reruns byte-reproducible from a stored file. Unknown sections or keys are
rejected rather than ignored: a typo should fail loudly, not silently run
a different experiment.
"""

from __future__ import annotations

import hashlib
import io
from configparser import ConfigParser
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Tuple

import numpy as np

from .dmp import DmpConfig
from .envs import ARM_2_BALLS, ARM_BALL, EnvConfig
from .errors import ConfigError
from .explore import ExplorationConfig
from .render import RenderConfig
from .vae import TrainConfig, VaeArchitecture


@dataclass
class DatasetConfig:
    n_images: int = 5000
    path: str = "dataset.gxim"

    def __post_init__(self) -> None:
        if self.n_images < 1:
            raise ConfigError("n_images must be >= 1")
        if not self.path:
            raise ConfigError("dataset path must be non-empty")


@dataclass
class EvaluationConfig:
    bins: int = 30
    bound_low: float = -1.0
    bound_high: float = 1.0
    slope_window: int = 500

    def __post_init__(self) -> None:
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        if self.bound_low >= self.bound_high:
            raise ConfigError("bound_low must be < bound_high")
        if self.slope_window < 1:
            raise ConfigError("slope_window must be >= 1")

    def bounds(self) -> np.ndarray:
        return np.array([[self.bound_low, self.bound_high]] * 2)


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    output_dir: str = "out"
    seeds: Tuple[int, ...] = (1, 2, 3, 4, 5)
    env: EnvConfig = field(default_factory=EnvConfig)
    dmp: DmpConfig = field(default_factory=DmpConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    arch: VaeArchitecture = field(default_factory=VaeArchitecture)
    train: TrainConfig = field(default_factory=TrainConfig)
    checkpoint: str = ""
    retrain_per_seed: bool = False
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    exploration: ExplorationConfig = field(default_factory=ExplorationConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        self.seeds = tuple(int(s) for s in self.seeds)


def default_config(variant: str = ARM_BALL) -> ExperimentConfig:
    return ExperimentConfig(env=EnvConfig.default(variant))


# ---------------------------------------------------------------------------
# serialization

def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def _section(cfg) -> Dict[str, str]:
    return {f.name: _fmt(getattr(cfg, f.name)) for f in fields(cfg)}


def serialize(config: ExperimentConfig) -> str:
    sections = {
        "experiment": {
            "name": config.name,
            "output_dir": config.output_dir,
            "seeds": _fmt(config.seeds),
        },
        "environment": _section(config.env),
        "dmp": _section(config.dmp),
        "render": _section(config.render),
        "representation": {
            **_section(config.arch),
            **_section(config.train),
            "checkpoint": config.checkpoint,
            "retrain_per_seed": _fmt(config.retrain_per_seed),
        },
        "dataset": _section(config.dataset),
        "exploration": _section(config.exploration),
        "evaluation": _section(config.evaluation),
    }
    out = io.StringIO()
    for name, body in sections.items():
        out.write(f"[{name}]\n")
        for key, value in body.items():
            out.write(f"{key} = {value}\n")
        out.write("\n")
    return out.getvalue()


# Per-key converters, grouped by section. A converter takes the raw string.

def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _floats(s: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in s.split())


def _ints(s: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in s.split())


_SCHEMA = {
    "experiment": {"name": str, "output_dir": str, "seeds": _ints},
    "environment": {
        "variant": str,
        "n_joints": int,
        "link_lengths": _floats,
        "joint_limits": _floats,
        "grasp_radius": float,
        "ring_radius": float,
        "ball_start_angle": float,
        "ball_start": _floats,
        "distractor_start": _floats,
        "distractor_sigma": float,
        "episode_steps": int,
    },
    "dmp": {
        "n_basis": int,
        "alpha": float,
        "beta": float,
        "alpha_s": float,
        "tau": float,
        "weight_scale": float,
        "centers": _floats,
        "widths": _floats,
    },
    "render": {
        "resolution": int,
        "ball_radius_px": float,
        "distractor_radius_px": float,
        "arm_rendered": _bool,
        "background": float,
        "foreground": float,
    },
    "representation": {
        "resolution": int,
        "conv_layers": int,
        "conv_channels": int,
        "dense_layers": int,
        "dense_units": int,
        "latent_dim": int,
        "beta": float,
        "learning_rate": float,
        "batch_size": int,
        "iterations": int,
        "seed": int,
        "precision": str,
        "checkpoint": str,
        "retrain_per_seed": _bool,
    },
    "dataset": {"n_images": int, "path": str},
    "exploration": {
        "strategy": str,
        "budget": int,
        "bootstrap_episodes": int,
        "online_switch": int,
        "sigma": float,
        "module_group_size": int,
        "interest_window": int,
        "epsilon": float,
        "interest_mode": str,
        "goal_expansion": float,
        "retain_images": _bool,
    },
    "evaluation": {"bins": int, "bound_low": float, "bound_high": float, "slope_window": int},
}

_ARCH_KEYS = ("resolution", "conv_layers", "conv_channels", "dense_layers", "dense_units", "latent_dim", "beta")
_TRAIN_KEYS = ("learning_rate", "batch_size", "iterations", "seed", "precision")


def parse(text: str) -> ExperimentConfig:
    parser = ConfigParser(interpolation=None)
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(text)
    except Exception as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    values: Dict[str, Dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        schema = _SCHEMA[section]
        out: Dict[str, object] = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                out[key] = schema[key](raw)
            except ConfigError:
                raise
            except Exception as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})") from exc
        values[section] = out

    exp = values.get("experiment", {})
    rep = values.get("representation", {})
    try:
        return ExperimentConfig(
            name=exp.get("name", "experiment"),
            output_dir=exp.get("output_dir", "out"),
            seeds=exp.get("seeds", (1, 2, 3, 4, 5)),
            env=EnvConfig(**values.get("environment", {})),
            dmp=DmpConfig(**values.get("dmp", {})),
            render=RenderConfig(**values.get("render", {})),
            arch=VaeArchitecture(**{k: v for k, v in rep.items() if k in _ARCH_KEYS}),
            train=TrainConfig(**{k: v for k, v in rep.items() if k in _TRAIN_KEYS}),
            checkpoint=rep.get("checkpoint", ""),
            retrain_per_seed=rep.get("retrain_per_seed", False),
            dataset=DatasetConfig(**values.get("dataset", {})),
            exploration=ExplorationConfig(**values.get("exploration", {})),
            evaluation=EvaluationConfig(**values.get("evaluation", {})),
        )
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError(f"invalid config structure: {exc}") from exc


def load(path) -> ExperimentConfig:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    return parse(text)


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(serialize(config).encode()).hexdigest()[:16]
