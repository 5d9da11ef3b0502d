"""Rasterization of scenes into small grayscale images, plus dataset files.

Images are binary (background/foreground) with hard edges: a pixel is lit
when its center falls inside a disk. The workspace [-1, 1] x [-1, 1] maps
onto the full image, x growing with columns and y growing upward (row 0 is
the top of the image).

Datasets of rendered frames are stored in a flat binary format:
16-byte header (magic ``GXIM``, then count, height, width as little-endian
uint32) followed by count * height * width uint8 pixels, row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

DATASET_MAGIC = b"GXIM"
_HEADER = struct.Struct("<4sIII")


@dataclass
class RenderConfig:
    resolution: int = 64
    ball_radius_px: float = 4.0
    distractor_radius_px: float = 2.5
    arm_rendered: bool = False
    background: float = 0.0
    foreground: float = 1.0

    def __post_init__(self) -> None:
        if self.resolution < 8:
            raise ConfigError("resolution must be >= 8")
        if self.ball_radius_px <= 0 or self.distractor_radius_px <= 0:
            raise ConfigError("disk radii must be positive")
        if self.distractor_radius_px >= self.ball_radius_px:
            raise ConfigError("distractor must render smaller than the ball")


def _to_pixel(pos, resolution: int):
    """Continuous pixel coordinates (row, col) of a workspace point."""
    col = (pos[0] + 1.0) / 2.0 * resolution - 0.5
    row = (1.0 - pos[1]) / 2.0 * resolution - 0.5
    return row, col


def _draw_disk(img: np.ndarray, center, radius_px: float, value: float) -> None:
    res = img.shape[0]
    row, col = center
    r_lo = max(int(np.floor(row - radius_px)), 0)
    r_hi = min(int(np.ceil(row + radius_px)), res - 1)
    c_lo = max(int(np.floor(col - radius_px)), 0)
    c_hi = min(int(np.ceil(col + radius_px)), res - 1)
    if r_lo > r_hi or c_lo > c_hi:
        return
    rr = np.arange(r_lo, r_hi + 1)[:, None]
    cc = np.arange(c_lo, c_hi + 1)[None, :]
    mask = (rr - row) ** 2 + (cc - col) ** 2 <= radius_px**2
    img[r_lo : r_hi + 1, c_lo : c_hi + 1][mask] = value


def _draw_polyline(img: np.ndarray, points: np.ndarray, value: float) -> None:
    # One pixel per ~half-pixel of arc length keeps the line gap-free.
    res = img.shape[0]
    for a, b in zip(points[:-1], points[1:]):
        ra, ca = _to_pixel(a, res)
        rb, cb = _to_pixel(b, res)
        n = max(int(np.hypot(rb - ra, cb - ca) * 2) + 1, 2)
        for t in np.linspace(0.0, 1.0, n):
            r = int(round(ra + t * (rb - ra)))
            c = int(round(ca + t * (cb - ca)))
            if 0 <= r < res and 0 <= c < res:
                img[r, c] = value

def render(scene, config: RenderConfig, link_lengths: Optional[Sequence[float]] = None) -> np.ndarray:
    """Rasterize a scene state into a (resolution, resolution) float array."""
    res = config.resolution
    img = np.full((res, res), config.background, dtype=float)
    if config.arm_rendered:
        if link_lengths is None:
            raise ConfigError("arm_rendered requires link_lengths")
        from .envs import joint_positions

        pts = joint_positions(scene.joint_angles, link_lengths)
        _draw_polyline(img, pts, config.foreground)
    if scene.distractor_pos is not None:
        _draw_disk(img, _to_pixel(scene.distractor_pos, res), config.distractor_radius_px, config.foreground)
    _draw_disk(img, _to_pixel(scene.ball_pos, res), config.ball_radius_px, config.foreground)
    return img


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def to_unit(image_u8: np.ndarray) -> np.ndarray:
    return image_u8.astype(float) / 255.0


def save_image_dataset(path, images: np.ndarray) -> None:
    """Write a stack of uint8 images, shape (count, height, width)."""
    arr = np.asarray(images)
    if arr.ndim != 3:
        raise ConfigError(f"expected a (count, height, width) stack, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ConfigError("image stacks are stored as uint8; quantize first (to_uint8)")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DATASET_MAGIC, arr.shape[0], arr.shape[1], arr.shape[2]))
        fh.write(arr.tobytes(order="C"))


def load_image_dataset(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ConfigError(f"{path}: truncated dataset header")
        magic, count, height, width = _HEADER.unpack(head)
        if magic != DATASET_MAGIC:
            raise ConfigError(f"{path}: bad magic {magic!r}, not an image dataset")
        body = fh.read()
    expected = count * height * width
    if len(body) != expected:
        raise ConfigError(f"{path}: expected {expected} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(count, height, width).copy()
