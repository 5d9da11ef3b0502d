import math

import numpy as np
import pytest

from goalex.envs import ARM_2_BALLS, EnvConfig, SceneState, initial_state
from goalex.errors import ConfigError
from goalex.render import (
    DATASET_MAGIC,
    RenderConfig,
    load_image_dataset,
    render,
    save_image_dataset,
    to_uint8,
    to_unit,
)


def render_oracle(scene, cfg):
    """Brute force: test every pixel center against every disk."""
    res = cfg.resolution
    img = np.full((res, res), cfg.background)
    disks = []
    if scene.distractor_pos is not None:
        disks.append((scene.distractor_pos, cfg.distractor_radius_px))
    disks.append((scene.ball_pos, cfg.ball_radius_px))
    for pos, radius in disks:
        col = (pos[0] + 1.0) / 2.0 * res - 0.5
        row = (1.0 - pos[1]) / 2.0 * res - 0.5
        for r in range(res):
            for c in range(res):
                if (r - row) ** 2 + (c - col) ** 2 <= radius**2:
                    img[r, c] = cfg.foreground
    return img


def scene_at(ball, distractor=None):
    return SceneState(
        joint_angles=np.zeros(6),
        ball_pos=np.asarray(ball, dtype=float),
        grasped=False,
        distractor_pos=None if distractor is None else np.asarray(distractor, dtype=float),
    )


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(resolution=4),
            dict(ball_radius_px=0.0),
            dict(distractor_radius_px=-1.0),
            dict(ball_radius_px=2.0, distractor_radius_px=2.0),
            dict(ball_radius_px=2.0, distractor_radius_px=3.0),
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ConfigError):
            RenderConfig(**kwargs)


class TestRender:
    def test_matches_pixel_center_oracle(self, rng):
        cfg = RenderConfig()
        for _ in range(10):
            ball = rng.uniform(-1, 1, size=2)
            distractor = rng.uniform(-1, 1, size=2)
            sc = scene_at(ball, distractor)
            np.testing.assert_array_equal(render(sc, cfg), render_oracle(sc, cfg))

    def test_binary_values_and_dtype(self, rng):
        img = render(scene_at(rng.uniform(-0.5, 0.5, 2)), RenderConfig())
        assert img.dtype == float
        assert set(np.unique(img)) <= {0.0, 1.0}

    def test_deterministic(self):
        sc = scene_at([0.3, -0.2])
        cfg = RenderConfig()
        np.testing.assert_array_equal(render(sc, cfg), render(sc, cfg))

    def test_disk_area_matches_radius(self, rng):
        # pinned example: radius 4 px -> about pi * 16 pixels lit
        cfg = RenderConfig()
        area = math.pi * cfg.ball_radius_px**2
        for ball in ([0.0, 0.0], [0.31, -0.47], [-0.55, 0.21]):
            count = int(render(scene_at(ball), cfg).sum())
            assert abs(count - area) / area < 0.15

    def test_center_disk_is_symmetric(self):
        # ball at the origin sits exactly between the four central pixels
        img = render(scene_at([0.0, 0.0]), RenderConfig())
        np.testing.assert_array_equal(img, np.flipud(img))
        np.testing.assert_array_equal(img, np.fliplr(img))

    def test_orientation(self):
        res = 64
        img = render(scene_at([0.9, 0.9]), RenderConfig())
        # +x,+y is top-right: lit pixels must sit at low rows, high cols
        rows, cols = np.nonzero(img)
        assert rows.mean() < res / 4 and cols.mean() > 3 * res / 4
        img2 = render(scene_at([-0.9, -0.9]), RenderConfig())
        rows2, cols2 = np.nonzero(img2)
        assert rows2.mean() > 3 * res / 4 and cols2.mean() < res / 4

    def test_whole_cell_shift_translates_image(self):
        cfg = RenderConfig()
        cell = 2.0 / cfg.resolution
        a = render(scene_at([0.0, 0.0]), cfg)
        b = render(scene_at([4 * cell, 0.0]), cfg)
        np.testing.assert_array_equal(np.roll(a, 4, axis=1), b)
        c = render(scene_at([0.0, 6 * cell]), cfg)
        np.testing.assert_array_equal(np.roll(a, -6, axis=0), c)

    def test_offscreen_ball_draws_nothing(self):
        img = render(scene_at([50.0, 50.0]), RenderConfig())
        assert img.sum() == 0

    def test_distractor_smaller_than_ball(self):
        cfg = RenderConfig()
        both = render(scene_at([0.5, 0.5], [-0.5, -0.5]), cfg)
        ball_only = render(scene_at([0.5, 0.5]), cfg)
        distractor_px = int(both.sum() - ball_only.sum())
        assert 0 < distractor_px < int(ball_only.sum())

    def test_ball_drawn_over_distractor(self):
        cfg = RenderConfig()
        overlapped = render(scene_at([0.0, 0.0], [0.0, 0.0]), cfg)
        ball_only = render(scene_at([0.0, 0.0]), cfg)
        np.testing.assert_array_equal(overlapped, ball_only)

    def test_arm_rendering(self):
        cfg = RenderConfig(arm_rendered=True)
        env = EnvConfig()
        sc = initial_state(env)  # arm stretched along +x
        img = render(sc, cfg, link_lengths=env.link_lengths)
        # the stretched arm lights a horizontal run right of center
        mid = cfg.resolution // 2
        band = img[mid - 1 : mid + 1, mid:]
        assert band.sum() >= cfg.resolution / 2 - 2

    def test_arm_requires_link_lengths(self):
        with pytest.raises(ConfigError):
            render(scene_at([0, 0]), RenderConfig(arm_rendered=True))

    def test_default_scene_has_no_arm(self):
        env = EnvConfig()
        sc = initial_state(env)
        img = render(sc, RenderConfig(), link_lengths=env.link_lengths)
        np.testing.assert_array_equal(img, render_oracle(sc, RenderConfig()))


class TestQuantize:
    def test_round_trip(self):
        img = np.array([[0.0, 1.0], [0.25, 0.75]])
        u8 = to_uint8(img)
        assert u8.dtype == np.uint8
        np.testing.assert_array_equal(u8, [[0, 255], [64, 191]])
        np.testing.assert_allclose(to_unit(u8), img, atol=1 / 255)

    def test_binary_images_survive_exactly(self, rng):
        img = render(scene_at(rng.uniform(-0.5, 0.5, 2)), RenderConfig())
        np.testing.assert_array_equal(to_unit(to_uint8(img)), img)


class TestDatasetFile:
    def test_round_trip(self, tmp_path, rng):
        stack = rng.integers(0, 256, size=(5, 16, 16)).astype(np.uint8)
        p = tmp_path / "imgs.bin"
        save_image_dataset(p, stack)
        loaded = load_image_dataset(p)
        assert loaded.dtype == np.uint8
        np.testing.assert_array_equal(loaded, stack)

    def test_header_layout(self, tmp_path):
        stack = np.zeros((3, 8, 9), dtype=np.uint8)
        p = tmp_path / "imgs.bin"
        save_image_dataset(p, stack)
        raw = p.read_bytes()
        assert raw[:4] == DATASET_MAGIC
        assert np.frombuffer(raw[4:16], dtype="<u4").tolist() == [3, 8, 9]
        assert len(raw) == 16 + 3 * 8 * 9

    def test_save_is_byte_stable(self, tmp_path, rng):
        stack = rng.integers(0, 256, size=(4, 8, 8)).astype(np.uint8)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_image_dataset(p1, stack)
        save_image_dataset(p2, stack)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_non_uint8(self, tmp_path):
        with pytest.raises(ConfigError):
            save_image_dataset(tmp_path / "x.bin", np.zeros((2, 8, 8)))

    def test_rejects_wrong_rank(self, tmp_path):
        with pytest.raises(ConfigError):
            save_image_dataset(tmp_path / "x.bin", np.zeros((8, 8), dtype=np.uint8))

    def test_rejects_bad_magic(self, tmp_path):
        p = tmp_path / "x.bin"
        p.write_bytes(b"NOPE" + bytes(12))
        with pytest.raises(ConfigError):
            load_image_dataset(p)

    def test_rejects_truncation(self, tmp_path):
        stack = np.zeros((3, 8, 8), dtype=np.uint8)
        p = tmp_path / "x.bin"
        save_image_dataset(p, stack)
        p.write_bytes(p.read_bytes()[:-10])
        with pytest.raises(ConfigError):
            load_image_dataset(p)
        p.write_bytes(b"GX")
        with pytest.raises(ConfigError):
            load_image_dataset(p)

    def test_rejects_trailing_bytes(self, tmp_path):
        stack = np.zeros((2, 8, 8), dtype=np.uint8)
        p = tmp_path / "x.bin"
        save_image_dataset(p, stack)
        p.write_bytes(p.read_bytes() + b"\x00")
        with pytest.raises(ConfigError):
            load_image_dataset(p)
