"""Experiment orchestration: the operations behind the CLI and the service.

Every command here is a plain function over an ExperimentConfig so the two
frontends stay thin. File layout of a run directory:

    out/
      config.ini          exact config used (its hash goes in the manifest)
      manifest.txt        name, strategy, variant, budget, seeds, config_hash
      summary.csv         strategy, seed, final_coverage (one row per seed)
      seed_<n>/history.csv   per-episode record
      seed_<n>/curve.csv     cumulative ball coverage
      seed_<n>/repr.ckpt     model checkpoint (online runs only)

Per-seed files appear as each seed finishes and the summary row is appended
immediately after, so an interrupted run leaves exactly the completed seeds
on disk.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import explore, metrics, vae
from .config import ExperimentConfig, config_hash, load, serialize
from .envs import ARM_2_BALLS, ARM_BALL, EnvConfig, SceneState, initial_state
from .errors import ConfigError
from .explore import STREAM_DATASET, RunResult
from .render import load_image_dataset, render, save_image_dataset, to_uint8

SUMMARY_HEADER = ["strategy", "seed", "final_coverage"]


def _ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


# ---------------------------------------------------------------------------
# dataset generation

def gen_dataset(
    config: ExperimentConfig,
    out_path: Optional[str] = None,
    n_images: Optional[int] = None,
) -> Tuple[str, int]:
    """Render n scenes with object positions uniform over their valid domains.

    ArmBall scenes put the ball uniformly on its ring; Arm2Balls scenes put
    ball and distractor uniformly in the workspace square. The arm pose is
    the fixed initial pose (and is not drawn under the default render
    settings), so images show exactly what varies between scenes.
    """
    env = config.env
    n = config.dataset.n_images if n_images is None else int(n_images)
    if n < 1:
        raise ConfigError("n_images must be >= 1")
    path = out_path or os.path.join(config.output_dir, config.dataset.path)
    _ensure_dir(os.path.dirname(path) or ".")
    rng = np.random.default_rng([config.seeds[0], STREAM_DATASET])

    base = initial_state(env)
    images = np.empty((n, config.render.resolution, config.render.resolution), dtype=np.uint8)
    for i in range(n):
        if env.variant == ARM_BALL:
            phi = rng.uniform(0.0, 2.0 * math.pi)
            ball = env.ring_radius * np.array([math.cos(phi), math.sin(phi)])
            distractor = None
        else:
            ball = rng.uniform(-1.0, 1.0, size=2)
            distractor = rng.uniform(-1.0, 1.0, size=2)
        scene = SceneState(
            joint_angles=base.joint_angles, ball_pos=ball, grasped=False, distractor_pos=distractor
        )
        images[i] = to_uint8(render(scene, config.render, link_lengths=env.link_lengths))
    save_image_dataset(path, images)
    return path, n


# ---------------------------------------------------------------------------
# representation training

def train_representation(
    config: ExperimentConfig,
    dataset_path: Optional[str] = None,
    out_dir: Optional[str] = None,
    progress: Optional[Callable[[int, float], None]] = None,
) -> Dict[str, str]:
    """Train the image model on a dataset file; persist checkpoint + curve."""
    path = dataset_path or os.path.join(config.output_dir, config.dataset.path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset not found: {path}")
    images = load_image_dataset(path)
    result = vae.train(images, config.arch, config.train, progress=progress)

    out = out_dir or config.output_dir
    _ensure_dir(out)
    ckpt_path = os.path.join(out, "repr.ckpt")
    curve_path = os.path.join(out, "training_curve.csv")
    vae.save_model(ckpt_path, result.model)
    metrics.write_csv(curve_path, ["iteration", "nll", "kl", "loss"], result.curve)
    return {"checkpoint": ckpt_path, "curve": curve_path, "iterations": str(config.train.iterations)}


def _resolve_model(config: ExperimentConfig, out_dir: str, seed: Optional[int]) -> vae.VaeModel:
    """Model for pre-trained-latent strategies: load a checkpoint or train one.

    With retrain_per_seed the training seed is replaced by the run seed, so
    each seed gets its own representation; otherwise one shared model is
    trained (or loaded) once.
    """
    if config.checkpoint:
        if not os.path.exists(config.checkpoint):
            raise FileNotFoundError(f"checkpoint not found: {config.checkpoint}")
        return vae.load_model(config.checkpoint, config.arch, config.train.precision)
    dataset_path = os.path.join(config.output_dir, config.dataset.path)
    if not os.path.exists(dataset_path):
        raise ConfigError(
            f"strategy {config.exploration.strategy} needs a representation: "
            f"set a checkpoint path or generate the dataset first ({dataset_path})"
        )
    images = load_image_dataset(dataset_path)
    train_cfg = config.train
    if seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=seed)
    result = vae.train(images, config.arch, train_cfg)
    _ensure_dir(out_dir)
    tag = "repr.ckpt" if seed is None else f"repr_seed_{seed}.ckpt"
    vae.save_model(os.path.join(out_dir, tag), result.model)
    return result.model


# ---------------------------------------------------------------------------
# exploration runs

def history_header(context_dim: int, theta_dim: int, feature_dim: int, goal_dim: int) -> List[str]:
    header = ["episode"]
    header += [f"context_{i}" for i in range(context_dim)]
    header += [f"theta_{i}" for i in range(theta_dim)]
    header += [f"feature_{i}" for i in range(feature_dim)]
    header += [f"goal_{i}" for i in range(goal_dim)]
    header += ["module_id", "cost"]
    return header


def write_history(path: str, result: RunResult) -> None:
    entries = result.entries
    first = entries[0]
    goal_dim = result.goal_dim
    header = history_header(
        first.context.shape[0], first.params.values.shape[0], first.features.shape[0], goal_dim
    )
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for e in entries:
            cells = [str(e.episode)]
            cells += [metrics.format_float(v) for v in e.context]
            cells += [metrics.format_float(v) for v in e.params.values]
            cells += [metrics.format_float(v) for v in e.features]
            if goal_dim:
                goal_cells = [""] * goal_dim
                if e.goal is not None:
                    for d, v in zip(result.module_dims[e.module_id], e.goal):
                        goal_cells[d] = metrics.format_float(v)
                cells += goal_cells
            cells.append(str(e.module_id))
            cells.append("" if e.cost is None else metrics.format_float(e.cost))
            fh.write(",".join(cells) + "\n")


@dataclass
class HistoryData:
    """A history file parsed back into arrays."""

    episodes: np.ndarray
    contexts: np.ndarray
    thetas: np.ndarray
    features: np.ndarray
    goals: np.ndarray  # NaN where absent
    module_ids: np.ndarray
    costs: np.ndarray  # NaN where absent

    @property
    def variant(self) -> str:
        return ARM_BALL if self.features.shape[1] == 4 else ARM_2_BALLS

    def ball_positions(self) -> np.ndarray:
        return np.array([explore.ball_position(f, self.variant) for f in self.features])

    def tip_positions(self) -> np.ndarray:
        return self.features[:, :2]

    def distractor_positions(self) -> Optional[np.ndarray]:
        return self.features[:, 4:6] if self.features.shape[1] >= 6 else None


def load_history(path: str) -> HistoryData:
    with open(path, "r") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if not rows:
        raise ConfigError(f"{path}: empty history")

    def cols(prefix: str) -> List[int]:
        return [i for i, h in enumerate(header) if h.startswith(prefix)]

    ctx, theta, feat, goal = cols("context_"), cols("theta_"), cols("feature_"), cols("goal_")
    mod = header.index("module_id")
    cost = header.index("cost")

    def grab(idx: List[int]) -> np.ndarray:
        return np.array([[float(r[i]) if r[i] else np.nan for i in idx] for r in rows])

    return HistoryData(
        episodes=np.array([int(r[0]) for r in rows]),
        contexts=grab(ctx),
        thetas=grab(theta),
        features=grab(feat),
        goals=grab(goal) if goal else np.zeros((len(rows), 0)),
        module_ids=np.array([int(r[mod]) for r in rows]),
        costs=np.array([float(r[cost]) if r[cost] else np.nan for r in rows]),
    )


def _write_manifest(path: str, config: ExperimentConfig, strategy: str, seeds: Sequence[int]) -> None:
    with open(path, "w") as fh:
        fh.write(f"name = {config.name}\n")
        fh.write(f"strategy = {strategy}\n")
        fh.write(f"variant = {config.env.variant}\n")
        fh.write(f"budget = {config.exploration.budget}\n")
        fh.write(f"seeds = {' '.join(str(s) for s in seeds)}\n")
        fh.write(f"config_hash = {config_hash(config)}\n")


def read_manifest(run_dir: str) -> Dict[str, str]:
    path = os.path.join(run_dir, "manifest.txt")
    if not os.path.exists(path):
        raise ConfigError(f"no manifest in {run_dir}")
    out: Dict[str, str] = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def run_experiment(
    config: ExperimentConfig,
    out_dir: Optional[str] = None,
    seed_override: Optional[int] = None,
    strategy_override: Optional[str] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> List[Tuple[str, int, int]]:
    """Execute the configured exploration once per seed; returns summary rows.

    All validation happens before the first rollout. Files for each seed are
    written as soon as that seed completes.
    """
    cfg = config
    if strategy_override is not None:
        cfg = dataclasses.replace(
            cfg, exploration=dataclasses.replace(cfg.exploration, strategy=strategy_override)
        )
    seeds = [int(seed_override)] if seed_override is not None else list(cfg.seeds)
    strategy = cfg.exploration.strategy
    out = out_dir or cfg.output_dir
    _ensure_dir(out)

    # Resolve the model up front so config problems surface before rollouts.
    model = None
    per_seed_models: Dict[int, vae.VaeModel] = {}
    if strategy in (explore.RGE_VAE, explore.MGE_VAE):
        if cfg.retrain_per_seed:
            for s in seeds:
                per_seed_models[s] = _resolve_model(cfg, out, s)
        else:
            model = _resolve_model(cfg, out, None)

    with open(os.path.join(out, "config.ini"), "w") as fh:
        fh.write(serialize(cfg))
    _write_manifest(os.path.join(out, "manifest.txt"), cfg, strategy, seeds)

    summary_path = os.path.join(out, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        fh.write(",".join(SUMMARY_HEADER) + "\n")

    rows: List[Tuple[str, int, int]] = []
    bounds = cfg.evaluation.bounds()
    for seed in seeds:
        if progress is not None:
            progress(f"seed {seed}: running {strategy}")
        result = explore.run_exploration(
            cfg.exploration,
            cfg.env,
            cfg.dmp,
            seed,
            model=per_seed_models.get(seed, model),
            render_config=cfg.render,
            online_arch=cfg.arch if strategy == explore.RGE_ONLINE else None,
            online_train=(
                dataclasses.replace(cfg.train, seed=seed) if strategy == explore.RGE_ONLINE else None
            ),
        )
        seed_dir = os.path.join(out, f"seed_{seed}")
        _ensure_dir(seed_dir)
        write_history(os.path.join(seed_dir, "history.csv"), result)
        balls = result.ball_positions()
        curve = metrics.exploration_curve(balls, bounds, cfg.evaluation.bins)
        metrics.write_csv(
            os.path.join(seed_dir, "curve.csv"),
            ["episode", "cells_occupied"],
            [(i + 1, int(c)) for i, c in enumerate(curve)],
        )
        if result.model is not None:
            vae.save_model(os.path.join(seed_dir, "repr.ckpt"), result.model)
        if cfg.exploration.retain_images:
            stack = np.stack([e.image_u8 for e in result.entries])
            save_image_dataset(os.path.join(seed_dir, "images.gxim"), stack)
        final = int(curve[-1])
        rows.append((strategy, seed, final))
        with open(summary_path, "a", newline="") as fh:
            fh.write(f"{strategy},{seed},{final}\n")
        if progress is not None:
            progress(f"seed {seed}: final coverage {final}")
    return rows


# ---------------------------------------------------------------------------
# aggregation and export

def read_summary(run_dir: str) -> List[Tuple[str, int, int]]:
    path = os.path.join(run_dir, "summary.csv")
    if not os.path.exists(path):
        raise ConfigError(f"no summary.csv in {run_dir}")
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != SUMMARY_HEADER:
            raise ConfigError(f"{path}: unexpected summary header {header}")
        for line in fh:
            if line.strip():
                strategy, seed, cov = line.strip().split(",")
                rows.append((strategy, int(seed), int(cov)))
    return rows


def compare(run_dirs: Sequence[str], out_dir: Optional[str] = None) -> Dict[str, object]:
    """Aggregate final coverage and mean curves across run directories.

    All runs must share an environment variant; mixing ArmBall with
    Arm2Balls coverage would not be comparable.
    """
    if not run_dirs:
        raise ConfigError("compare needs at least one run directory")
    variants = set()
    per_strategy: Dict[str, List[int]] = {}
    curves: Dict[str, List[np.ndarray]] = {}
    for d in run_dirs:
        manifest = read_manifest(d)
        variants.add(manifest.get("variant", "?"))
        for strategy, seed, cov in read_summary(d):
            per_strategy.setdefault(strategy, []).append(cov)
            curve_path = os.path.join(d, f"seed_{seed}", "curve.csv")
            if os.path.exists(curve_path):
                data = np.loadtxt(curve_path, delimiter=",", skiprows=1)
                curves.setdefault(strategy, []).append(np.atleast_2d(data)[:, 1])
    if len(variants) > 1:
        raise ConfigError(f"refusing to compare runs across environments: {sorted(variants)}")

    table = []
    for strategy in sorted(per_strategy):
        vals = np.array(per_strategy[strategy], dtype=float)
        table.append((strategy, float(vals.mean()), float(vals.std()), int(vals.size)))

    mean_curves: Dict[str, np.ndarray] = {}
    for strategy, seed_curves in curves.items():
        n = min(len(c) for c in seed_curves)
        mean_curves[strategy] = np.mean([c[:n] for c in seed_curves], axis=0)

    result: Dict[str, object] = {"table": table, "mean_curves": mean_curves}
    if out_dir is not None:
        _ensure_dir(out_dir)
        agg_path = os.path.join(out_dir, "aggregate.csv")
        metrics.write_csv(agg_path, ["strategy", "mean_final_coverage", "std_final_coverage", "n"], table)
        files = [agg_path]
        for strategy, curve in sorted(mean_curves.items()):
            path = os.path.join(out_dir, f"mean_curve_{strategy}.csv")
            metrics.write_csv(
                path, ["episode", "mean_cells_occupied"], [(i + 1, float(v)) for i, v in enumerate(curve)]
            )
            files.append(path)
        result["files"] = files
    return result


def export_history(history_path: str, out_dir: str, bins: int = 30) -> Tuple[str, str]:
    """Scatter + coverage-curve CSVs for one stored history."""
    if not os.path.exists(history_path):
        raise FileNotFoundError(f"history not found: {history_path}")
    data = load_history(history_path)
    return metrics.export(
        out_dir,
        tip_positions=data.tip_positions(),
        ball_positions=data.ball_positions(),
        distractor_positions=data.distractor_positions(),
        bins=bins,
        episodes=data.episodes,
    )
