"""Differentiable operations.

Every op validates shapes, computes the forward result with numpy, and
registers a closure that routes the output gradient to its inputs. The
convolution pair is implemented by materializing patches (im2col) so both
directions reduce to one large matmul; the transposed convolution is the
exact adjoint, built from the same two patch helpers used in reverse.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import ConfigError
from .core import Tensor, accumulate, make_node

ArrayLike = Union[Tensor, np.ndarray, float, int]


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# elementwise / linear algebra

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Elementwise sum; also accepts a 1-D bias against 2-D rows or 4-D channels."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        out = a.data + b.data
        reduce_axes: Optional[Tuple[int, ...]] = None
    elif b.ndim == 1 and a.ndim == 2 and a.shape[1] == b.shape[0]:
        out = a.data + b.data
        reduce_axes = (0,)
    elif b.ndim == 1 and a.ndim == 4 and a.shape[1] == b.shape[0]:
        out = a.data + b.data[None, :, None, None]
        reduce_axes = (0, 2, 3)
    else:
        raise ConfigError(f"add: incompatible shapes {a.shape} and {b.shape}")

    def bwd(g: np.ndarray) -> None:
        accumulate(a, g)
        accumulate(b, g if reduce_axes is None else g.sum(axis=reduce_axes))

    return make_node(out, (a, b), bwd, "add")


def scale(x: ArrayLike, factor: float) -> Tensor:
    x = as_tensor(x)
    factor = float(factor)
    out = x.data * factor

    def bwd(g: np.ndarray) -> None:
        accumulate(x, g * factor)

    return make_node(out, (x,), bwd, "scale")


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ConfigError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = a.data @ b.data

    def bwd(g: np.ndarray) -> None:
        if a.requires_grad:
            accumulate(a, g @ b.data.T)
        if b.requires_grad:
            accumulate(b, a.data.T @ g)

    return make_node(out, (a, b), bwd, "matmul")


def dense(x: ArrayLike, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine layer: x @ weight (+ bias). weight is (in_features, out_features)."""
    y = matmul(x, weight)
    return y if bias is None else add(y, bias)


def relu(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = np.maximum(x.data, 0.0)
    mask = x.data > 0  # subgradient 0 at the kink

    def bwd(g: np.ndarray) -> None:
        accumulate(x, g * mask)

    return make_node(out, (x,), bwd, "relu")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh is saturating and overflow-free, unlike the naive exp form.
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    out = _sigmoid(x.data)

    def bwd(g: np.ndarray) -> None:
        accumulate(x, g * out * (1.0 - out))

    return make_node(out, (x,), bwd, "sigmoid")


def reshape(x: ArrayLike, shape: Tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(shape)

    def bwd(g: np.ndarray) -> None:
        accumulate(x, g.reshape(x.shape))

    return make_node(out, (x,), bwd, "reshape")


def flatten(x: ArrayLike) -> Tensor:
    """Collapse all but the leading (batch) axis."""
    x = as_tensor(x)
    return reshape(x, (x.shape[0], -1))


def narrow(x: ArrayLike, start: int, stop: int) -> Tensor:
    """Columns [start, stop) of a 2-D tensor; gradient scatters back as zeros elsewhere."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise ConfigError(f"narrow expects a 2-D tensor, got shape {x.shape}")
    if not (0 <= start < stop <= x.shape[1]):
        raise ConfigError(f"narrow range [{start}, {stop}) out of bounds for {x.shape}")
    out = x.data[:, start:stop].copy()

    def bwd(g: np.ndarray) -> None:
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        accumulate(x, full)

    return make_node(out, (x,), bwd, "narrow")


# ---------------------------------------------------------------------------
# convolutions

def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(x: np.ndarray, kernel: int, stride: int, padding: int) -> np.ndarray:
    """Gather all kernel-sized patches: (B, C, K, K, Ho, Wo)."""
    b, c, h, w = x.shape
    ho = conv_output_size(h, kernel, stride, padding)
    wo = conv_output_size(w, kernel, stride, padding)
    xp = np.zeros((b, c, h + 2 * padding, w + 2 * padding), dtype=x.dtype)
    xp[:, :, padding : padding + h, padding : padding + w] = x
    cols = np.empty((b, c, kernel, kernel, ho, wo), dtype=x.dtype)
    for i in range(kernel):
        for j in range(kernel):
            cols[:, :, i, j] = xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
    return cols


def _col2im(cols: np.ndarray, out_shape: Tuple[int, ...], kernel: int, stride: int, padding: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add patches back onto an image."""
    b, c, h, w = out_shape
    ho, wo = cols.shape[-2:]
    xp = np.zeros((b, c, h + 2 * padding, w + 2 * padding), dtype=cols.dtype)
    for i in range(kernel):
        for j in range(kernel):
            xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[:, :, i, j]
    return xp[:, :, padding : padding + h, padding : padding + w]


def conv2d(x: ArrayLike, kernel: Tensor, stride: int = 2, padding: int = 1) -> Tensor:
    """Cross-correlation of (B, C, H, W) with kernels (O, C, K, K)."""
    x = as_tensor(x)
    if x.ndim != 4 or kernel.ndim != 4:
        raise ConfigError(f"conv2d expects 4-D input and kernel, got {x.shape} and {kernel.shape}")
    b, c, h, w = x.shape
    o, ck, k, k2 = kernel.shape
    if ck != c or k != k2:
        raise ConfigError(f"conv2d: kernel {kernel.shape} does not match input channels {c}")
    ho = conv_output_size(h, k, stride, padding)
    wo = conv_output_size(w, k, stride, padding)
    if ho < 1 or wo < 1:
        raise ConfigError(f"conv2d: output would be empty for input {x.shape}")

    cols = _im2col(x.data, k, stride, padding)
    colsm = cols.transpose(0, 4, 5, 1, 2, 3).reshape(b * ho * wo, c * k * k)
    kmat = kernel.data.reshape(o, c * k * k)
    out = (colsm @ kmat.T).reshape(b, ho, wo, o).transpose(0, 3, 1, 2)

    def bwd(g: np.ndarray) -> None:
        gm = g.transpose(0, 2, 3, 1).reshape(b * ho * wo, o)
        if kernel.requires_grad:
            accumulate(kernel, (gm.T @ colsm).reshape(kernel.shape))
        if x.requires_grad:
            dcols = (gm @ kmat).reshape(b, ho, wo, c, k, k).transpose(0, 3, 4, 5, 1, 2)
            accumulate(x, _col2im(dcols, x.shape, k, stride, padding))

    return make_node(np.ascontiguousarray(out), (x, kernel), bwd, "conv2d")


def transposed_conv2d(x: ArrayLike, kernel: Tensor, stride: int = 2, padding: int = 1) -> Tensor:
    """Adjoint of conv2d (fractionally strided conv). kernel is (I, O, K, K).

    Output spatial size is (H - 1) * stride - 2 * padding + K, which with the
    default kernel 4 / stride 2 / padding 1 exactly doubles H and W.
    """
    x = as_tensor(x)
    if x.ndim != 4 or kernel.ndim != 4:
        raise ConfigError(f"transposed_conv2d expects 4-D input and kernel, got {x.shape} and {kernel.shape}")
    b, i_ch, h, w = x.shape
    ki, o, k, k2 = kernel.shape
    if ki != i_ch or k != k2:
        raise ConfigError(f"transposed_conv2d: kernel {kernel.shape} does not match input channels {i_ch}")
    ho = (h - 1) * stride - 2 * padding + k
    wo = (w - 1) * stride - 2 * padding + k
    if ho < 1 or wo < 1:
        raise ConfigError(f"transposed_conv2d: output would be empty for input {x.shape}")

    xm = x.data.transpose(0, 2, 3, 1).reshape(b * h * w, i_ch)
    kmat = kernel.data.reshape(i_ch, o * k * k)
    cols = (xm @ kmat).reshape(b, h, w, o, k, k).transpose(0, 3, 4, 5, 1, 2)
    out = _col2im(cols, (b, o, ho, wo), k, stride, padding)

    def bwd(g: np.ndarray) -> None:
        gcols = _im2col(g, k, stride, padding)
        gm = gcols.transpose(0, 4, 5, 1, 2, 3).reshape(b * h * w, o * k * k)
        if kernel.requires_grad:
            accumulate(kernel, (xm.T @ gm).reshape(kernel.shape))
        if x.requires_grad:
            accumulate(x, (gm @ kmat.T).reshape(b, h, w, i_ch).transpose(0, 3, 1, 2))

    return make_node(out, (x, kernel), bwd, "transposed_conv2d")


# ---------------------------------------------------------------------------
# stochastic and loss ops

def reparameterize(mu: Tensor, logvar: Tensor, rng: np.random.Generator) -> Tensor:
    """Sample z = mu + exp(logvar / 2) * eps with eps ~ N(0, 1).

    The noise is a constant of the graph: gradients flow through mu and
    logvar only, which is the whole point of the trick.
    """
    if mu.shape != logvar.shape:
        raise ConfigError(f"reparameterize: mu {mu.shape} vs logvar {logvar.shape}")
    eps = rng.standard_normal(mu.shape)
    if mu.dtype == np.float32:
        eps = eps.astype(np.float32)
    std = np.exp(0.5 * logvar.data)
    out = mu.data + std * eps

    def bwd(g: np.ndarray) -> None:
        accumulate(mu, g)
        accumulate(logvar, g * (0.5 * std * eps))

    return make_node(out, (mu, logvar), bwd, "reparameterize")


def kl_gaussian(mu: Tensor, logvar: Tensor) -> Tensor:
    """Summed KL(N(mu, exp(logvar)) || N(0, 1)); nonnegative up to rounding."""
    if mu.shape != logvar.shape:
        raise ConfigError(f"kl_gaussian: mu {mu.shape} vs logvar {logvar.shape}")
    ev = np.exp(logvar.data)
    out = np.asarray(-0.5 * np.sum(1.0 + logvar.data - mu.data**2 - ev))

    def bwd(g: np.ndarray) -> None:
        accumulate(mu, g * mu.data)
        accumulate(logvar, g * (-0.5) * (1.0 - ev))

    return make_node(out, (mu, logvar), bwd, "kl_gaussian")


def bernoulli_nll(logits: Tensor, targets: ArrayLike) -> Tensor:
    """Summed negative log-likelihood of targets under Bernoulli(sigmoid(logits)).

    Computed from logits directly, max(l, 0) - l*t + log(1 + exp(-|l|)), so
    neither direction ever forms log(0). Targets are data, not a graph node.
    """
    t = targets.data if isinstance(targets, Tensor) else np.asarray(targets)
    if logits.shape != t.shape:
        raise ConfigError(f"bernoulli_nll: logits {logits.shape} vs targets {t.shape}")
    l = logits.data
    out = np.asarray(np.sum(np.maximum(l, 0.0) - l * t + np.log1p(np.exp(-np.abs(l)))))

    def bwd(g: np.ndarray) -> None:
        accumulate(logits, g * (_sigmoid(l) - t))

    return make_node(out, (logits,), bwd, "bernoulli_nll")
