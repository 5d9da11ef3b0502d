"""Reverse-mode automatic differentiation over numpy arrays.

Graphs are built implicitly as ops run (define-by-run): each op returns a
Tensor holding the result, its parent tensors, and a closure that pushes an
incoming output gradient into the parents. ComputeGraph then walks the graph
once in reverse topological order. Gradients accumulate on tensors until
explicitly zeroed, so shared parameters and fan-out nodes just add up.

Only float64 and float32 are supported; float64 is the default everywhere.
Set CHECK_FINITE to True to raise NumericError as soon as any op produces a
non-finite value (off by default, it costs a full pass over each result).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from ..errors import ConfigError, NumericError, StateError

CHECK_FINITE = False

_grad_enabled = True


def is_grad_enabled() -> bool:
    return _grad_enabled


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    """An array node. Leaf tensors with requires_grad=True are parameters."""

    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: Tuple["Tensor", ...] = (),
        backward_fn: Optional[Callable[[np.ndarray], None]] = None,
        name: str = "",
    ):
        arr = np.asarray(data)
        if arr.dtype not in (np.float64, np.float32):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, requires_grad={self.requires_grad})"


def parameter(data, name: str = "") -> Tensor:
    return Tensor(data, requires_grad=True, name=name)


def constant(data, name: str = "") -> Tensor:
    return Tensor(data, requires_grad=False, name=name)


def _check_finite(data: np.ndarray, op: str) -> None:
    if CHECK_FINITE and not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by {op}")


def make_node(
    data: np.ndarray,
    parents: Tuple[Tensor, ...],
    backward_fn: Callable[[np.ndarray], None],
    op: str,
) -> Tensor:
    """Wrap an op result; drops graph edges under no_grad or constant inputs."""
    _check_finite(data, op)
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward_fn=backward_fn, name=op)
    return Tensor(data)


def accumulate(t: Tensor, g: np.ndarray) -> None:
    """Add a gradient contribution to a tensor (no-op for constants)."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
        if t.grad.shape != t.data.shape:
            t.grad = np.broadcast_to(t.grad, t.data.shape).copy()
    else:
        t.grad += g


def _topo_order(root: Tensor) -> List[Tensor]:
    """Parents-before-children ordering, iterative so depth is unbounded."""
    order: List[Tensor] = []
    seen = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


class ComputeGraph:
    """Snapshot of the graph below a scalar loss, ready for one backward pass."""

    def __init__(self, root: Tensor):
        if root.data.size != 1:
            raise ConfigError(f"backward needs a scalar root, got shape {root.data.shape}")
        self.root = root
        self.order = _topo_order(root)
        self._consumed = False

    def parameters(self) -> List[Tensor]:
        """Leaf tensors with requires_grad, in topological order."""
        return [t for t in self.order if t.requires_grad and not t.parents]

    def backward(self) -> Dict[Tensor, np.ndarray]:
        """Visit every node exactly once, newest first; returns leaf gradients."""
        if self._consumed:
            raise StateError("backward() already ran on this graph; rebuild it after a new forward pass")
        self._consumed = True
        self.root.grad = np.ones_like(self.root.data)
        for node in reversed(self.order):
            if node.backward_fn is not None and node.grad is not None:
                node.backward_fn(node.grad)
        return {t: t.grad for t in self.parameters()}


def backward(loss: Tensor) -> Dict[Tensor, np.ndarray]:
    """Convenience wrapper: build the graph for `loss` and run one backward pass."""
    return ComputeGraph(loss).backward()


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.zero_grad()
