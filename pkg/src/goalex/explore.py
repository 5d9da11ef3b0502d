"""Goal-directed exploration with hindsight storage.

The loop alternates between two phases. A bootstrap phase executes random
motor parameters to seed the database. After that, each episode samples a
goal in some goal space, asks a nearest-neighbor meta-policy for the motor
parameters whose recorded outcome lies closest to (context, goal), perturbs
them with Gaussian exploration noise, executes them, and records the result.
Every outcome is stored in every module's database regardless of which goal
produced it, so any future goal can reuse it (hindsight storage).

Strategies:

* RPE: random motor parameters for the whole budget (the baseline).
* RGE-EFR / RGE-VAE: one goal module spanning the full goal space, over
  engineered scene features or a pre-trained latent space.
* RGE-Online: random bootstrap, then a latent space trained on the
  bootstrap's own images, then goal exploration in that space.
* MGE-EFR / MGE-VAE: the goal space is split into modules (e.g. hand /
  ball / distractor); a learning-progress curriculum picks which module
  to pursue each episode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import vae
from .dmp import DmpConfig, DmpParams, integrate, param_dim, random_params
from .envs import EnvConfig, engineered_features, feature_bounds, feature_dim, initial_state, rollout
from .errors import ConfigError, StateError
from .render import RenderConfig, to_uint8

RPE = "RPE"
RGE_EFR = "RGE-EFR"
RGE_VAE = "RGE-VAE"
RGE_ONLINE = "RGE-Online"
MGE_EFR = "MGE-EFR"
MGE_VAE = "MGE-VAE"
STRATEGIES = (RPE, RGE_EFR, RGE_VAE, RGE_ONLINE, MGE_EFR, MGE_VAE)

LEARNED_STRATEGIES = (RGE_VAE, RGE_ONLINE, MGE_VAE)
MODULAR_STRATEGIES = (MGE_EFR, MGE_VAE)

INTEREST_COST_DELTA = "cost_delta"
INTEREST_IMPROVEMENT = "improvement"
INTEREST_MODES = (INTEREST_COST_DELTA, INTEREST_IMPROVEMENT)

# Substream indices hung off the master seed; one generator per concern so
# strategies that skip a concern leave the others untouched.
STREAM_ENV = 0
STREAM_PARAMS = 1
STREAM_GOALS = 2
STREAM_NOISE = 3
STREAM_MODULES = 4
STREAM_DATASET = 5


@dataclass
class ExplorationConfig:
    strategy: str = RGE_EFR
    budget: int = 5000
    bootstrap_episodes: int = 100
    online_switch: int = 2000
    sigma: float = 0.05
    module_group_size: int = 2
    interest_window: int = 40
    epsilon: float = 0.2
    interest_mode: str = INTEREST_IMPROVEMENT
    goal_expansion: float = 0.2
    retain_images: bool = False

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        if self.bootstrap_episodes < 1:
            raise ConfigError("bootstrap_episodes must be >= 1")
        if self.online_switch < 1:
            raise ConfigError("online_switch must be >= 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if self.module_group_size < 1:
            raise ConfigError("module_group_size must be >= 1")
        if self.interest_window < 2 or self.interest_window % 2 != 0:
            raise ConfigError("interest_window must be an even number >= 2")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.interest_mode not in INTEREST_MODES:
            raise ConfigError(f"interest_mode must be one of {INTEREST_MODES}")
        if self.goal_expansion < 0:
            raise ConfigError("goal_expansion must be >= 0")


# ---------------------------------------------------------------------------
# goal spaces

class EngineeredGoalSpace:
    """Hand-picked outcome features with their known physical bounds."""

    def __init__(self, env_config: EnvConfig):
        self.env_config = env_config
        self.dim = feature_dim(env_config)
        self._bounds = feature_bounds(env_config)

    def embed_outcome(self, outcome) -> np.ndarray:
        return np.asarray(outcome.features, dtype=float)

    def bounds(self) -> np.ndarray:
        return self._bounds


class LearnedGoalSpace:
    """Latent space of a trained image model; bounds fit on bootstrap data.

    Goals are sampled from the per-dimension [min, max] of the bootstrap
    embeddings, symmetrically widened by `expansion` (fraction of the width),
    so some goals land just beyond anything achieved so far.
    """

    def __init__(self, model: vae.VaeModel, expansion: float = 0.2):
        self.model = model
        self.expansion = expansion
        self.dim = model.arch.latent_dim
        self._bounds: Optional[np.ndarray] = None

    def embed_outcome(self, outcome) -> np.ndarray:
        return vae.embed(self.model, outcome.image)

    def embed_images(self, images: np.ndarray) -> np.ndarray:
        return vae.embed(self.model, images)

    def fit_bounds(self, embeddings: np.ndarray) -> None:
        emb = np.asarray(embeddings, dtype=float)
        if emb.ndim != 2 or emb.shape[0] == 0:
            raise ConfigError("fit_bounds needs a non-empty (count, dim) embedding array")
        lo = emb.min(axis=0)
        hi = emb.max(axis=0)
        pad = 0.5 * self.expansion * (hi - lo)
        self._bounds = np.stack([lo - pad, hi + pad], axis=1)

    def bounds(self) -> np.ndarray:
        if self._bounds is None:
            raise StateError("goal bounds not initialized; fit_bounds on bootstrap embeddings first")
        return self._bounds


# ---------------------------------------------------------------------------
# interest tracking and goal modules

class InterestTracker:
    """Sliding-window learning-progress estimate for one module.

    ``cost_delta`` keeps the last `window` achieved costs and reports the
    absolute difference between the means of the two window halves (0 until
    the window is full). ``improvement`` keeps, for each pursued goal, how
    much the goal's best database distance shrank when the new outcome
    arrived, and reports the window mean; uncontrollable outcomes stop
    shrinking anything once their noise cloud is covered, so their interest
    decays toward 0 while learnable skills keep producing improvements.
    """

    def __init__(self, window: int = 40, mode: str = INTEREST_COST_DELTA):
        if window < 2 or window % 2 != 0:
            raise ConfigError("window must be an even number >= 2")
        if mode not in INTEREST_MODES:
            raise ConfigError(f"mode must be one of {INTEREST_MODES}")
        self.window = window
        self.mode = mode
        self.values: List[float] = []

    def push(self, cost: float, improvement: float = 0.0) -> None:
        value = cost if self.mode == INTEREST_COST_DELTA else improvement
        self.values.append(float(value))
        if len(self.values) > self.window:
            del self.values[0]

    def interest(self) -> float:
        if self.mode == INTEREST_COST_DELTA:
            if len(self.values) < self.window:
                return 0.0
            half = self.window // 2
            old = float(np.mean(self.values[:half]))
            new = float(np.mean(self.values[half:]))
            return abs(new - old)
        if not self.values:
            return 0.0
        return float(np.mean(self.values))


class GoalModule:
    """A slice of the goal space plus its sampler, cost, and interest state."""

    def __init__(self, module_id: int, dims: Sequence[int], space, tracker: InterestTracker):
        self.id = module_id
        self.dims = np.asarray(tuple(dims), dtype=int)
        self.space = space
        self.tracker = tracker

    def bounds(self) -> np.ndarray:
        return self.space.bounds()[self.dims]

    def project(self, embedding: np.ndarray) -> np.ndarray:
        return np.asarray(embedding, dtype=float)[self.dims]

    def cost(self, tau: np.ndarray, embedding: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(tau, dtype=float) - self.project(embedding)))


def module_partition(space_dim: int, env_config: EnvConfig, config: ExplorationConfig) -> List[Tuple[int, ...]]:
    """Dimension groups for the chosen strategy; groups never overlap."""
    if config.strategy not in MODULAR_STRATEGIES:
        return [tuple(range(space_dim))]
    if config.strategy == MGE_EFR:
        # Feature layout pairs up as (tip, ball[, distractor]).
        if space_dim % 2 != 0:
            raise ConfigError(f"engineered feature space of dim {space_dim} does not split into pairs")
        return [tuple(range(i, i + 2)) for i in range(0, space_dim, 2)]
    size = config.module_group_size
    return [tuple(range(i, min(i + size, space_dim))) for i in range(0, space_dim, size)]


def build_modules(space, env_config: EnvConfig, config: ExplorationConfig) -> List[GoalModule]:
    groups = module_partition(space.dim, env_config, config)
    seen: set = set()
    for g in groups:
        if seen & set(g):
            raise ConfigError("module projections overlap")
        seen |= set(g)
    return [
        GoalModule(i, dims, space, InterestTracker(config.interest_window, config.interest_mode))
        for i, dims in enumerate(groups)
    ]


# ---------------------------------------------------------------------------
# meta-policy

class MetaPolicy:
    """1-nearest-neighbor inverse model over per-module databases.

    Every record holds (context, theta, projected embedding); queries find
    the record minimizing Euclidean distance on the concatenated
    (context, goal) key and return its theta plus exploration noise.
    Exact ties resolve to the lowest episode index.
    """

    def __init__(self, modules: List[GoalModule], sigma: float, context_dim: int, theta_dim: int, capacity: int = 1024):
        self.modules = modules
        self.sigma = sigma
        self.count = 0
        self._contexts = np.empty((capacity, context_dim))
        self._thetas = np.empty((capacity, theta_dim))
        self._proj = {m.id: np.empty((capacity, len(m.dims))) for m in modules}

    def _grow(self) -> None:
        cap = self._contexts.shape[0] * 2
        self._contexts = np.concatenate([self._contexts, np.empty_like(self._contexts)])
        self._thetas = np.concatenate([self._thetas, np.empty_like(self._thetas)])
        for k in self._proj:
            self._proj[k] = np.concatenate([self._proj[k], np.empty_like(self._proj[k])])

    def add(self, context: np.ndarray, theta: DmpParams, embedding: np.ndarray) -> None:
        if self.count == self._contexts.shape[0]:
            self._grow()
        i = self.count
        self._contexts[i] = context
        self._thetas[i] = theta.values
        for m in self.modules:
            self._proj[m.id][i] = m.project(embedding)
        self.count += 1

    def database_size(self, module_id: int) -> int:
        return self.count

    def nearest(self, context: np.ndarray, tau: np.ndarray, module_id: int) -> Tuple[int, float]:
        """Index of the nearest record and the goal-only distance floor.

        The second value is the smallest distance between tau and any stored
        projected outcome, ignoring context: the best this module has ever
        gotten to the queried goal, used by the improvement tracker.
        """
        if self.count == 0:
            raise StateError("meta-policy database is empty; bootstrap first")
        n = self.count
        ctx_d2 = np.sum((self._contexts[:n] - np.asarray(context, dtype=float)) ** 2, axis=1)
        goal_d2 = np.sum((self._proj[module_id][:n] - np.asarray(tau, dtype=float)) ** 2, axis=1)
        idx = int(np.argmin(ctx_d2 + goal_d2))  # argmin keeps the first (oldest) minimum
        return idx, float(math.sqrt(float(np.min(goal_d2))))

    def theta_at(self, idx: int) -> np.ndarray:
        return self._thetas[idx].copy()


def infer_params(meta: MetaPolicy, context: np.ndarray, tau: np.ndarray, module_id: int, rng: np.random.Generator) -> DmpParams:
    """Nearest stored theta for (context, tau), plus clipped Gaussian noise."""
    idx, _ = meta.nearest(context, tau, module_id)
    theta = meta.theta_at(idx) + meta.sigma * rng.standard_normal(meta._thetas.shape[1])
    return DmpParams(theta)  # construction clips to [-1, 1]


def update_meta_policy(meta: MetaPolicy, context: np.ndarray, theta: DmpParams, embedding: np.ndarray) -> None:
    """Append one record to every module database (hindsight storage)."""
    meta.add(context, theta, embedding)


def sample_goal(module: GoalModule, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw inside the module's box (degenerate box -> that point)."""
    b = module.bounds()
    return rng.uniform(b[:, 0], b[:, 1])


def update_interest(tracker: InterestTracker, cost: float, improvement: float = 0.0) -> None:
    tracker.push(cost, improvement)


def sample_module(modules: List[GoalModule], rng: np.random.Generator, epsilon: float = 0.2) -> int:
    """Epsilon-uniform mixture over interest-proportional module choice."""
    n = len(modules)
    if n == 0:
        raise ConfigError("need at least one module")
    if n == 1:
        return 0
    if rng.random() < epsilon:
        return int(rng.integers(0, n))
    interests = np.array([m.tracker.interest() for m in modules], dtype=float)
    total = interests.sum()
    if total <= 0.0:
        return int(rng.integers(0, n))
    return int(rng.choice(n, p=interests / total))


# ---------------------------------------------------------------------------
# run loop

@dataclass
class HistoryEntry:
    episode: int  # 1-based, strictly increasing
    context: np.ndarray
    params: DmpParams
    features: np.ndarray
    embedding: Optional[np.ndarray] = None
    goal: Optional[np.ndarray] = None
    module_id: int = -1
    cost: Optional[float] = None
    image_u8: Optional[np.ndarray] = None


@dataclass
class RunResult:
    strategy: str
    seed: int
    entries: List[HistoryEntry]
    env_config: EnvConfig
    goal_dim: int
    module_dims: List[Tuple[int, ...]] = field(default_factory=list)
    model: Optional[vae.VaeModel] = None  # set when the run trained its own model
    modules: List[GoalModule] = field(default_factory=list)
    meta: Optional[MetaPolicy] = None

    def ball_positions(self) -> np.ndarray:
        return np.array([ball_position(e.features, self.env_config.variant) for e in self.entries])

    def module_ids(self) -> np.ndarray:
        return np.array([e.module_id for e in self.entries], dtype=int)


def ball_position(features: np.ndarray, variant: str) -> np.ndarray:
    """Cartesian ball position recovered from the engineered features."""
    from .envs import ARM_BALL, VARIANTS

    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    f = np.asarray(features, dtype=float)
    if variant == ARM_BALL:
        return np.array([f[2] * math.cos(f[3]), f[2] * math.sin(f[3])])
    return f[2:4].copy()


def bootstrap(
    n: int,
    env_config: EnvConfig,
    dmp_config: DmpConfig,
    rng_params: np.random.Generator,
    rng_env: np.random.Generator,
    render_config: Optional[RenderConfig] = None,
    keep_images: bool = False,
    start_episode: int = 1,
) -> List[HistoryEntry]:
    """n episodes of random motor exploration."""
    if n < 1:
        raise ConfigError("bootstrap needs n >= 1")
    context = engineered_features(initial_state(env_config), env_config)
    entries = []
    for ep in range(start_episode, start_episode + n):
        theta = random_params(env_config.n_joints, rng_params, dmp_config)
        traj = integrate(theta, np.zeros(env_config.n_joints), dmp_config, env_config)
        outcome = rollout(env_config, traj, rng_env, render_config)
        entries.append(
            HistoryEntry(
                episode=ep,
                context=context.copy(),
                params=theta,
                features=outcome.features,
                image_u8=to_uint8(outcome.image) if keep_images else None,
            )
        )
    return entries


def run_exploration(
    explore_config: ExplorationConfig,
    env_config: EnvConfig,
    dmp_config: DmpConfig,
    seed: int,
    model: Optional[vae.VaeModel] = None,
    render_config: Optional[RenderConfig] = None,
    online_arch: Optional[vae.VaeArchitecture] = None,
    online_train: Optional[vae.TrainConfig] = None,
    progress: Optional[Callable[[int], None]] = None,
) -> RunResult:
    """Execute one seeded exploration run; history length equals the budget.

    Goal sampling and parameter inference never consume environment rollouts,
    so the rollout count equals the budget exactly.
    """
    cfg = explore_config
    strategy = cfg.strategy
    online = strategy == RGE_ONLINE
    modular = strategy in MODULAR_STRATEGIES
    learned = strategy in LEARNED_STRATEGIES

    if strategy in (RGE_VAE, MGE_VAE) and model is None:
        raise ConfigError(f"{strategy} needs a trained model")
    if online and (online_arch is None or online_train is None):
        raise ConfigError("RGE-Online needs an architecture and training config for the switch point")

    rng_env = np.random.default_rng([seed, STREAM_ENV])
    rng_params = np.random.default_rng([seed, STREAM_PARAMS])
    rng_goals = np.random.default_rng([seed, STREAM_GOALS])
    rng_noise = np.random.default_rng([seed, STREAM_NOISE])
    rng_modules = np.random.default_rng([seed, STREAM_MODULES])

    if strategy == RPE:
        switch = cfg.budget
    elif online:
        switch = min(cfg.online_switch, cfg.budget)
    else:
        switch = min(cfg.bootstrap_episodes, cfg.budget)

    render_cfg = render_config if render_config is not None else RenderConfig()
    # Learned spaces need the bootstrap images (to train on and/or embed).
    keep_bootstrap_images = cfg.retain_images or learned
    entries = bootstrap(
        switch, env_config, dmp_config, rng_params, rng_env, render_cfg, keep_bootstrap_images
    )
    if progress is not None:
        progress(len(entries))

    trained_model = None
    space = None
    modules: List[GoalModule] = []
    meta: Optional[MetaPolicy] = None
    context = entries[0].context

    if strategy != RPE and switch < cfg.budget:
        if online:
            stack = np.stack([e.image_u8 for e in entries])
            trained_model = vae.train(stack, online_arch, online_train).model
            model = trained_model
        if learned:
            space = LearnedGoalSpace(model, cfg.goal_expansion)
            stack = np.stack([e.image_u8 for e in entries])
            embeddings = space.embed_images(stack)
            space.fit_bounds(embeddings)
            for e, emb in zip(entries, embeddings):
                e.embedding = emb
                if not cfg.retain_images:
                    e.image_u8 = None
        else:
            space = EngineeredGoalSpace(env_config)
            for e in entries:
                e.embedding = e.features.copy()

        modules = build_modules(space, env_config, cfg)
        meta = MetaPolicy(
            modules,
            cfg.sigma,
            context_dim=context.shape[0],
            theta_dim=param_dim(env_config.n_joints, dmp_config),
            capacity=cfg.budget,
        )
        for e in entries:
            meta.add(e.context, e.params, e.embedding)

        for ep in range(switch + 1, cfg.budget + 1):
            k = sample_module(modules, rng_modules, cfg.epsilon) if modular else 0
            module = modules[k]
            tau = sample_goal(module, rng_goals)
            idx, d_before = meta.nearest(context, tau, k)
            theta = DmpParams(meta.theta_at(idx) + cfg.sigma * rng_noise.standard_normal(meta._thetas.shape[1]))
            traj = integrate(theta, np.zeros(env_config.n_joints), dmp_config, env_config)
            outcome = rollout(env_config, traj, rng_env, render_cfg)
            embedding = space.embed_outcome(outcome)
            cost = module.cost(tau, embedding)
            update_interest(module.tracker, cost, max(d_before - cost, 0.0))
            meta.add(context, theta, embedding)
            entries.append(
                HistoryEntry(
                    episode=ep,
                    context=context.copy(),
                    params=theta,
                    features=outcome.features,
                    embedding=embedding,
                    goal=tau,
                    module_id=k,
                    cost=cost,
                    image_u8=to_uint8(outcome.image) if cfg.retain_images else None,
                )
            )
            if progress is not None and ep % 500 == 0:
                progress(ep)

    return RunResult(
        strategy=strategy,
        seed=seed,
        entries=entries,
        env_config=env_config,
        goal_dim=space.dim if space is not None else 0,
        module_dims=[tuple(int(d) for d in m.dims) for m in modules],
        model=trained_model,
        modules=modules,
        meta=meta,
    )
