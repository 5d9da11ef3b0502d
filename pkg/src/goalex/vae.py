"""Variational autoencoder over rendered scenes, trained with the ELBO.

The encoder stacks stride-2 convolutions (4x4 kernels), flattens, passes
through dense rectifier layers and ends in a single dense head emitting the
posterior mean and log-variance of each latent. The decoder mirrors it with
transposed convolutions and emits per-pixel Bernoulli logits. Training
minimizes reconstruction NLL + beta * KL(posterior || N(0, I)), averaged
over the batch, with Adam. beta = 1 is a plain VAE; beta > 1 trades
reconstruction for a more factorized code.

The default architecture is deliberately small so that training finishes in
minutes on a CPU; ``VaeArchitecture.full_scale()`` gives the larger variant
(4 conv layers of 32 channels, 256-unit dense layers).

Scenes are embedded as the posterior mean, never a sample: downstream goal
machinery needs the representation to be a pure function of the image.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import nn
from .errors import ConfigError, NumericError
from .nn import ops

# Substream indices for seeded generators (offset past the exploration
# streams so a shared master seed never reuses a stream).
STREAM_INIT = 16
STREAM_BATCH = 17
STREAM_REPARAM = 18

KERNEL = 4
STRIDE = 2
PADDING = 1
CURVE_INTERVAL = 100


@dataclass
class VaeArchitecture:
    resolution: int = 64
    conv_layers: int = 2
    conv_channels: int = 16
    dense_layers: int = 2
    dense_units: int = 128
    latent_dim: int = 10
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.conv_layers < 1 or self.dense_layers < 1:
            raise ConfigError("need at least one conv layer and one dense layer")
        if self.conv_channels < 1 or self.dense_units < 1 or self.latent_dim < 1:
            raise ConfigError("channel, unit and latent counts must be positive")
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")
        grid = self.resolution
        for _ in range(self.conv_layers):
            if grid % 2 != 0:
                raise ConfigError(
                    f"resolution {self.resolution} does not survive {self.conv_layers} stride-2 halvings"
                )
            grid //= 2
        if grid < 1:
            raise ConfigError("too many conv layers for this resolution")

    @classmethod
    def full_scale(cls, resolution: int = 64, beta: float = 1.0) -> "VaeArchitecture":
        return cls(
            resolution=resolution,
            conv_layers=4,
            conv_channels=32,
            dense_layers=2,
            dense_units=256,
            latent_dim=10,
            beta=beta,
        )

    @property
    def grid(self) -> int:
        return self.resolution >> self.conv_layers

    @property
    def flat_features(self) -> int:
        return self.conv_channels * self.grid * self.grid


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    iterations: int = 10000
    seed: int = 0
    precision: str = "float64"

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.precision not in ("float64", "float32"):
            raise ConfigError("precision must be float64 or float32")

    @property
    def dtype(self):
        return np.float64 if self.precision == "float64" else np.float32


class VaeModel:
    """Parameter container plus the encode/decode graph builders."""

    def __init__(self, arch: VaeArchitecture, rng: Optional[np.random.Generator] = None, dtype=np.float64):
        self.arch = arch
        self.dtype = dtype
        self._params: List[nn.Tensor] = []
        a = arch

        def make(shape, fan_in, gain, name):
            if rng is None:
                data = np.zeros(shape, dtype=dtype)
            else:
                data = (rng.standard_normal(shape) * np.sqrt(gain / fan_in)).astype(dtype)
            p = nn.parameter(data, name)
            self._params.append(p)
            return p

        def make_bias(size, name):
            p = nn.parameter(np.zeros(size, dtype=dtype), name)
            self._params.append(p)
            return p

        self.enc_convs = []
        ch = 1
        for i in range(a.conv_layers):
            k = make((a.conv_channels, ch, KERNEL, KERNEL), ch * KERNEL * KERNEL, 2.0, f"enc_conv{i}_k")
            b = make_bias(a.conv_channels, f"enc_conv{i}_b")
            self.enc_convs.append((k, b))
            ch = a.conv_channels

        self.enc_dense = []
        width = a.flat_features
        for i in range(a.dense_layers):
            w = make((width, a.dense_units), width, 2.0, f"enc_dense{i}_w")
            b = make_bias(a.dense_units, f"enc_dense{i}_b")
            self.enc_dense.append((w, b))
            width = a.dense_units
        self.enc_head_w = make((width, 2 * a.latent_dim), width, 1.0, "enc_head_w")
        self.enc_head_b = make_bias(2 * a.latent_dim, "enc_head_b")

        self.dec_dense = []
        width = a.latent_dim
        for i in range(a.dense_layers):
            w = make((width, a.dense_units), width, 2.0, f"dec_dense{i}_w")
            b = make_bias(a.dense_units, f"dec_dense{i}_b")
            self.dec_dense.append((w, b))
            width = a.dense_units
        self.dec_expand_w = make((width, a.flat_features), width, 2.0, "dec_expand_w")
        self.dec_expand_b = make_bias(a.flat_features, "dec_expand_b")

        self.dec_tconvs = []
        for i in range(a.conv_layers - 1):
            k = make((a.conv_channels, a.conv_channels, KERNEL, KERNEL), a.conv_channels * KERNEL * KERNEL, 2.0, f"dec_tconv{i}_k")
            b = make_bias(a.conv_channels, f"dec_tconv{i}_b")
            self.dec_tconvs.append((k, b))
        self.dec_out_k = make((a.conv_channels, 1, KERNEL, KERNEL), a.conv_channels * KERNEL * KERNEL, 1.0, "dec_out_k")
        self.dec_out_b = make_bias(1, "dec_out_b")

    def parameters(self) -> List[nn.Tensor]:
        """Canonical ordering; checkpoints store arrays in exactly this order."""
        return list(self._params)

    def encode(self, x: nn.Tensor) -> Tuple[nn.Tensor, nn.Tensor]:
        a = self.arch
        h = x
        for k, b in self.enc_convs:
            h = ops.relu(ops.add(ops.conv2d(h, k, STRIDE, PADDING), b))
        h = ops.flatten(h)
        for w, b in self.enc_dense:
            h = ops.relu(ops.dense(h, w, b))
        head = ops.dense(h, self.enc_head_w, self.enc_head_b)
        mu = ops.narrow(head, 0, a.latent_dim)
        logvar = ops.narrow(head, a.latent_dim, 2 * a.latent_dim)
        return mu, logvar

    def decode(self, z: nn.Tensor) -> nn.Tensor:
        a = self.arch
        h = z
        for w, b in self.dec_dense:
            h = ops.relu(ops.dense(h, w, b))
        h = ops.relu(ops.dense(h, self.dec_expand_w, self.dec_expand_b))
        h = ops.reshape(h, (h.shape[0], a.conv_channels, a.grid, a.grid))
        for k, b in self.dec_tconvs:
            h = ops.relu(ops.add(ops.transposed_conv2d(h, k, STRIDE, PADDING), b))
        return ops.add(ops.transposed_conv2d(h, self.dec_out_k, STRIDE, PADDING), self.dec_out_b)


def _as_batch(images: np.ndarray, resolution: int, dtype) -> np.ndarray:
    """Normalize image input to a (B, 1, R, R) float array in [0, 1]."""
    arr = np.asarray(images)
    if arr.dtype == np.uint8:
        arr = arr.astype(dtype) / 255.0
    else:
        arr = arr.astype(dtype, copy=False)
    if arr.ndim == 2:
        arr = arr[None, None]
    elif arr.ndim == 3:
        arr = arr[:, None]
    elif arr.ndim != 4:
        raise ConfigError(f"expected image(s) of rank 2..4, got shape {arr.shape}")
    if arr.shape[-2:] != (resolution, resolution):
        raise ConfigError(f"images are {arr.shape[-2:]}, model expects {(resolution, resolution)}")
    return arr


def elbo_loss(
    model: VaeModel,
    batch: np.ndarray,
    beta: float,
    rng: np.random.Generator,
) -> Tuple[nn.Tensor, nn.Tensor, nn.Tensor]:
    """Per-batch-mean loss and its two parts; loss = nll + beta * kl exactly."""
    x = _as_batch(batch, model.arch.resolution, model.dtype)
    xt = nn.constant(x)
    mu, logvar = model.encode(xt)
    z = ops.reparameterize(mu, logvar, rng)
    logits = model.decode(z)
    b = x.shape[0]
    nll = ops.scale(ops.bernoulli_nll(logits, x), 1.0 / b)
    kl = ops.scale(ops.kl_gaussian(mu, logvar), 1.0 / b)
    loss = ops.add(nll, ops.scale(kl, beta))
    return loss, nll, kl


@dataclass
class TrainResult:
    model: VaeModel
    history: np.ndarray  # (iterations, 3): nll, kl, loss per iteration
    curve: List[Tuple[int, float, float, float]]  # (iteration, nll, kl, loss) every 100


def train(
    images: np.ndarray,
    arch: VaeArchitecture,
    cfg: TrainConfig,
    progress: Optional[Callable[[int, float], None]] = None,
) -> TrainResult:
    """Minibatch Adam on the ELBO; batches are uniform with replacement.

    All randomness (init, batch order, reparameterization noise) derives
    from cfg.seed, so the returned model is a pure function of the inputs.
    """
    images = np.asarray(images)
    if images.ndim != 3 or images.shape[0] == 0:
        raise ConfigError(f"expected a non-empty (count, H, W) image stack, got shape {images.shape}")
    rng_init = np.random.default_rng([cfg.seed, STREAM_INIT])
    rng_batch = np.random.default_rng([cfg.seed, STREAM_BATCH])
    rng_noise = np.random.default_rng([cfg.seed, STREAM_REPARAM])

    model = VaeModel(arch, rng_init, cfg.dtype)
    params = model.parameters()
    opt = nn.AdamState(cfg.learning_rate)
    n = images.shape[0]
    history = np.zeros((cfg.iterations, 3))
    curve: List[Tuple[int, float, float, float]] = []

    for it in range(1, cfg.iterations + 1):
        idx = rng_batch.integers(0, n, size=cfg.batch_size)
        loss, nll, kl = elbo_loss(model, images[idx], arch.beta, rng_noise)
        if not np.isfinite(loss.item()):
            raise NumericError(f"training diverged at iteration {it}: loss = {loss.item()}")
        nn.ComputeGraph(loss).backward()
        nn.adam_step(opt, params)
        nn.zero_grads(params)
        history[it - 1] = (nll.item(), kl.item(), loss.item())
        if it % CURVE_INTERVAL == 0:
            curve.append((it, float(nll.item()), float(kl.item()), float(loss.item())))
            if progress is not None:
                progress(it, float(loss.item()))
    return TrainResult(model=model, history=history, curve=curve)


def smoothed_endpoints(series: Sequence[float], window: int = 50) -> Tuple[float, float]:
    """Mean of the first and last `window` values (the whole series if shorter)."""
    arr = np.asarray(series, dtype=float)
    if arr.size == 0:
        raise ConfigError("empty series")
    w = min(window, arr.size)
    return float(arr[:w].mean()), float(arr[-w:].mean())


def embed(model: VaeModel, images: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Posterior mean of each image: the deterministic scene representation.

    Accepts a single (R, R) image or a stack; returns (latent,) or (B, latent)
    as float64.
    """
    x = _as_batch(images, model.arch.resolution, model.dtype)
    single = np.asarray(images).ndim == 2
    outs = []
    with nn.no_grad():
        for lo in range(0, x.shape[0], chunk):
            mu, _ = model.encode(nn.constant(x[lo : lo + chunk]))
            outs.append(mu.data.astype(np.float64))
    result = np.concatenate(outs, axis=0)
    return result[0] if single else result


def latent_ranges(model: VaeModel, images: np.ndarray) -> np.ndarray:
    """Per-dimension [min, max] over the embeddings of an image stack."""
    arr = np.asarray(images)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[0] == 0:
        raise ConfigError("latent_ranges needs at least one image")
    emb = embed(model, arr)
    return np.stack([emb.min(axis=0), emb.max(axis=0)], axis=1)


def save_model(path, model: VaeModel) -> None:
    nn.save_checkpoint(path, [p.data for p in model.parameters()])


def load_model(path, arch: VaeArchitecture, precision: str = "float64") -> VaeModel:
    dtype = np.float64 if precision == "float64" else np.float32
    arrays = nn.load_checkpoint(path)
    model = VaeModel(arch, rng=None, dtype=dtype)
    params = model.parameters()
    if len(arrays) != len(params):
        raise ConfigError(f"checkpoint has {len(arrays)} arrays, architecture needs {len(params)}")
    for p, a in zip(params, arrays):
        if a.shape != p.data.shape:
            raise ConfigError(f"checkpoint array shape {a.shape} does not match parameter {p.name} {p.data.shape}")
        p.data = a.astype(dtype)
    return model
