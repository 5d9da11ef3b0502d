"""Exploration performance measurement and CSV export.

Performance is the number of distinct grid cells the ball has visited: the
outcome plane [-1, 1]^2 is cut into bins x bins cells (30 x 30 = 900 by
default) and a cell counts once it contains at least one recorded ball
position. Points outside the bounds clamp to the edge cells so every point
lands somewhere.

Exported files use comma-separated values with a header row, floats written
with repr() so re-exporting identical data yields byte-identical files.
"""

from __future__ import annotations

import math
import os
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError

BALL_BOUNDS = np.array([[-1.0, 1.0], [-1.0, 1.0]])
DEFAULT_BINS = 30
SLOPE_WINDOW = 500


def _cell_indices(points: np.ndarray, bounds: np.ndarray, bins: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ConfigError(f"expected (count, dim) points, got shape {pts.shape}")
    b = np.asarray(bounds, dtype=float)
    if b.shape != (pts.shape[1], 2):
        raise ConfigError(f"bounds shape {b.shape} does not match point dimension {pts.shape[1]}")
    if np.any(b[:, 1] <= b[:, 0]):
        raise ConfigError("bounds must satisfy min < max per dimension")
    if bins < 1:
        raise ConfigError("bins must be >= 1")
    scaled = (pts - b[:, 0]) / (b[:, 1] - b[:, 0]) * bins
    return np.clip(np.floor(scaled).astype(int), 0, bins - 1)


def coverage(points: Sequence, bounds: Optional[np.ndarray] = None, bins: int = DEFAULT_BINS) -> int:
    """Distinct cells containing at least one point."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        # Still validate the grid itself so bad bounds never pass silently.
        _cell_indices(np.zeros((1, np.asarray(bounds).shape[0] if bounds is not None else 2)),
                      BALL_BOUNDS if bounds is None else bounds, bins)
        return 0
    idx = _cell_indices(pts, BALL_BOUNDS if bounds is None else bounds, bins)
    return len({tuple(row) for row in idx.tolist()})


def exploration_curve(
    points: Sequence, bounds: Optional[np.ndarray] = None, bins: int = DEFAULT_BINS
) -> np.ndarray:
    """Cumulative coverage after each episode; nondecreasing by construction."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.zeros(0, dtype=int)
    idx = _cell_indices(pts, BALL_BOUNDS if bounds is None else bounds, bins)
    seen: set = set()
    out = np.zeros(idx.shape[0], dtype=int)
    for i, row in enumerate(idx.tolist()):
        seen.add(tuple(row))
        out[i] = len(seen)
    return out


def slope_change(series: Sequence[float], switch_episode: int, window: int = SLOPE_WINDOW) -> Tuple[float, float]:
    """Least-squares slopes just before and just after a switch point.

    Episodes are 1-based: series[e - 1] is the value after episode e. The
    slopes are fit on episodes [switch - window, switch] and
    [switch, switch + window]; both segments include the switch episode.
    """
    arr = np.asarray(series, dtype=float)
    if window < 1:
        raise ConfigError("window must be >= 1")
    if switch_episode - window < 1 or switch_episode + window > arr.shape[0]:
        raise ConfigError(
            f"window {window} around episode {switch_episode} exceeds series of length {arr.shape[0]}"
        )
    before = arr[switch_episode - window - 1 : switch_episode]
    after = arr[switch_episode - 1 : switch_episode + window]
    x = np.arange(window + 1, dtype=float)
    return _ls_slope(x, before), _ls_slope(x, after)


def _ls_slope(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    return float(np.sum(xc * (y - y.mean())) / np.sum(xc * xc))


def format_float(v: float) -> str:
    return repr(float(v))


def write_csv(path, header: Sequence[str], rows) -> None:
    """Write rows of mixed int/float/str cells; floats via repr, newline-terminated."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
                    cells.append(str(int(v)))
                elif isinstance(v, (float, np.floating)):
                    cells.append(format_float(v))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def export(
    out_dir,
    tip_positions: np.ndarray,
    ball_positions: np.ndarray,
    distractor_positions: Optional[np.ndarray] = None,
    bounds: Optional[np.ndarray] = None,
    bins: int = DEFAULT_BINS,
    episodes: Optional[Sequence[int]] = None,
) -> Tuple[str, str]:
    """Write scatter.csv (per-episode positions) and curve.csv (coverage).

    Returns the two file paths. Row counts equal the episode count.
    """
    tips = np.asarray(tip_positions, dtype=float)
    balls = np.asarray(ball_positions, dtype=float)
    if tips.shape != balls.shape or tips.ndim != 2 or tips.shape[1] != 2:
        raise ConfigError(f"positions must share shape (count, 2); got {tips.shape} and {balls.shape}")
    n = tips.shape[0]
    eps = list(range(1, n + 1)) if episodes is None else [int(e) for e in episodes]
    if len(eps) != n:
        raise ConfigError("episodes length does not match position count")

    os.makedirs(out_dir, exist_ok=True)
    scatter_path = os.path.join(out_dir, "scatter.csv")
    curve_path = os.path.join(out_dir, "curve.csv")

    header = ["episode", "end_x", "end_y", "ball_x", "ball_y"]
    if distractor_positions is not None:
        distr = np.asarray(distractor_positions, dtype=float)
        if distr.shape != tips.shape:
            raise ConfigError("distractor positions must match the episode count")
        header += ["distractor_x", "distractor_y"]
        rows = [
            (eps[i], tips[i, 0], tips[i, 1], balls[i, 0], balls[i, 1], distr[i, 0], distr[i, 1])
            for i in range(n)
        ]
    else:
        rows = [(eps[i], tips[i, 0], tips[i, 1], balls[i, 0], balls[i, 1]) for i in range(n)]
    write_csv(scatter_path, header, rows)

    curve = exploration_curve(balls, bounds, bins)
    write_csv(curve_path, ["episode", "cells_occupied"], [(eps[i], int(curve[i])) for i in range(n)])
    return scatter_path, curve_path
