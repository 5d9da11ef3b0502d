"""Minimal neural-network stack: autodiff tensors, ops, Adam, checkpoints."""

from .core import (
    ComputeGraph,
    Tensor,
    backward,
    constant,
    no_grad,
    parameter,
    zero_grads,
)
from .io import load_checkpoint, save_checkpoint
from .optim import AdamState, adam_step
from . import ops

__all__ = [
    "ComputeGraph",
    "Tensor",
    "backward",
    "constant",
    "no_grad",
    "parameter",
    "zero_grads",
    "load_checkpoint",
    "save_checkpoint",
    "AdamState",
    "adam_step",
    "ops",
]
