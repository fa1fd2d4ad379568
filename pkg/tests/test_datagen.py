import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from otreg.datagen import (
    CameraConfig,
    ScenarioConfig,
    add_clipped_gaussian_noise,
    generate_scenario,
    make_partial_pair,
    make_self_occluded_pair,
    pair_rng,
    read_pair_dir,
    render_self_occluded,
    synthetic_shape,
)
from otreg.geometry import PointCloud


def unit_sphere(rng, n):
    v = rng.normal(size=(n, 3))
    return PointCloud(v / np.linalg.norm(v, axis=1, keepdims=True))


class TestClippedGaussianNoise:
    def test_zero_sigma_identical(self):
        pc = PointCloud(np.random.default_rng(64).uniform(size=(20, 3)))
        out = add_clipped_gaussian_noise(pc, 0.0, 0.05, np.random.default_rng(0))
        np.testing.assert_array_equal(out.points, pc.points)

    def test_displacements_respect_clip(self):
        rng = np.random.default_rng(65)
        pc = PointCloud(np.zeros((100_000 // 3 + 1, 3)))
        out = add_clipped_gaussian_noise(pc, 0.01, 0.05, rng)
        d = out.points - pc.points
        assert d.min() >= -0.05 and d.max() <= 0.05

    def test_empirical_std_matches_sigma(self):
        rng = np.random.default_rng(66)
        pc = PointCloud(np.zeros((40_000, 3)))
        out = add_clipped_gaussian_noise(pc, 0.01, 0.05, rng)
        std = (out.points - pc.points).std()
        assert abs(std - 0.01) / 0.01 < 0.05


class TestMakePartialPair:
    def test_no_crop_no_noise_exact(self):
        rng = np.random.default_rng(67)
        full = synthetic_shape(rng, 256)
        cfg = ScenarioConfig(source_count=256, kept_count=256)
        source, target, t = make_partial_pair(full, cfg, rng)
        expected = source.points @ t.rotation.T + t.translation
        np.testing.assert_allclose(
            np.sort(target.points, axis=0), np.sort(expected, axis=0), atol=1e-12)

    def test_paper_defaults_produce_768(self):
        rng = np.random.default_rng(68)
        full = synthetic_shape(rng, 1024)
        source, target, _ = make_partial_pair(full, ScenarioConfig(), rng)
        assert len(source) == 768 and len(target) == 768

    def test_deterministic_given_seed(self):
        full = synthetic_shape(np.random.default_rng(1), 300)
        cfg = ScenarioConfig(source_count=300, kept_count=200)
        a = make_partial_pair(full, cfg, np.random.default_rng(7))
        b = make_partial_pair(full, cfg, np.random.default_rng(7))
        np.testing.assert_array_equal(a[0].points, b[0].points)
        np.testing.assert_array_equal(a[1].points, b[1].points)
        np.testing.assert_array_equal(a[2].rotation, b[2].rotation)

    def test_transform_maps_source_onto_prenoise_target(self):
        rng = np.random.default_rng(69)
        full = synthetic_shape(rng, 400)
        cfg = ScenarioConfig(source_count=400, kept_count=300)
        source, target, t = make_partial_pair(full, cfg, rng)
        moved = source.points @ t.rotation.T + t.translation
        d = np.linalg.norm(moved[:, None] - target.points[None, :], axis=2)
        overlap = (d.min(axis=1) < 1e-12).sum()
        assert overlap >= 100  # crops of 300/400 must share many points

    def test_crop_is_nearest_neighbor_contiguous(self):
        rng = np.random.default_rng(70)
        full = PointCloud(rng.uniform(-1, 1, (128, 3)))
        cfg = ScenarioConfig(source_count=128, kept_count=64)
        source, _, _ = make_partial_pair(full, cfg, rng)
        crop = {tuple(p) for p in source.points}
        # some anchor's 64 nearest neighbors reproduce the crop exactly
        found = False
        for anchor in full.points:
            order = np.argsort(np.linalg.norm(full.points - anchor, axis=1),
                               kind="stable")[:64]
            if {tuple(p) for p in full.points[order]} == crop:
                found = True
                break
        assert found

    def test_insufficient_points(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError, match="insufficient points"):
            make_partial_pair(PointCloud(np.zeros((10, 3))),
                              ScenarioConfig(), rng)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ScenarioConfig(source_count=100, kept_count=200)
        with pytest.raises(ValueError):
            ScenarioConfig(rot_range_deg=(45, 0))


class TestRenderSelfOccluded:
    def test_single_point_duplicated_to_target_count(self):
        pc = PointCloud([[0.1, -0.2, 0.3]])
        out = render_self_occluded(pc, CameraConfig(), 7,
                                   np.random.default_rng(71))
        assert len(out) == 7
        np.testing.assert_array_equal(out.points,
                                      np.tile(pc.points, (7, 1)))

    def test_occluded_collinear_point_removed(self):
        # two points on the camera axis share the center pixel; the
        # farther one must lose the depth test
        cam = CameraConfig(elevation_range_deg=(45, 45),
                           azimuth_range_deg=(45, 45))
        el = az = np.radians(45)
        direction = np.array([np.cos(el) * np.cos(az),
                              np.cos(el) * np.sin(az), np.sin(el)])
        near = 0.2 * direction
        far = -0.2 * direction  # centroid sits at the origin
        pc = PointCloud(np.stack([near, far]))
        out = render_self_occluded(pc, cam, 4, np.random.default_rng(72))
        np.testing.assert_allclose(out.points, np.tile(near, (4, 1)), atol=0)

    def test_sphere_survival_fraction(self):
        rng = np.random.default_rng(73)
        fractions = []
        for _ in range(4):
            sphere = unit_sphere(rng, 1024)
            out = render_self_occluded(sphere, CameraConfig(), 1024, rng)
            distinct = {tuple(p) for p in out.points}
            fractions.append(len(distinct) / 1024)
        assert all(0.35 <= f <= 0.65 for f in fractions)

    def test_output_is_subset_of_input(self):
        rng = np.random.default_rng(74)
        pc = synthetic_shape(rng, 2000)
        out = render_self_occluded(pc, CameraConfig(), 512, rng)
        pool = {tuple(p) for p in pc.points}
        assert all(tuple(p) in pool for p in out.points)

    def test_degenerate_viewpoint_error(self):
        # 20 points stacked along the camera axis collapse to one pixel;
        # a single survivor out of 20 is a degenerate view
        cam = CameraConfig(elevation_range_deg=(45, 45),
                           azimuth_range_deg=(45, 45))
        el = az = np.radians(45)
        direction = np.array([np.cos(el) * np.cos(az),
                              np.cos(el) * np.sin(az), np.sin(el)])
        offsets = np.linspace(-0.2, 0.2, 20)
        pc = PointCloud(offsets[:, None] * direction)
        with pytest.raises(ValueError, match="degenerate viewpoint"):
            render_self_occluded(pc, cam, 16, np.random.default_rng(0))

    def test_camera_validation(self):
        with pytest.raises(ValueError):
            CameraConfig(distance=0.0)
        with pytest.raises(ValueError):
            CameraConfig(elevation_range_deg=(30, 100))


class TestSelfOccludedPair:
    def test_sizes(self):
        rng = np.random.default_rng(76)
        full = synthetic_shape(rng, 4096)
        source, target, t = make_self_occluded_pair(full, ScenarioConfig(),
                                                    CameraConfig(), rng)
        assert len(source) == 1024
        assert len(target) == 512
        assert abs(np.linalg.det(t.rotation) - 1) < 1e-9


class TestSyntheticShape:
    def test_normalized_per_axis(self):
        pc = synthetic_shape(np.random.default_rng(77), 500)
        assert pc.points.shape == (500, 3)
        assert np.abs(pc.points).max() <= 1.0 + 1e-12


class TestScenarioDirectory:
    def test_layout_and_round_trip(self, tmp_path):
        out = tmp_path / "scenario"
        cfg = ScenarioConfig(source_count=128, kept_count=96, seed=5)
        generate_scenario(out, "partial", 3, cfg)
        assert (out / "manifest.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["pairs"] == 3 and manifest["master_seed"] == 5
        dirs = sorted(out.glob("pair_*"))
        assert [d.name for d in dirs] == ["pair_0000", "pair_0001", "pair_0002"]
        source, target, t = read_pair_dir(dirs[0])
        assert len(source) == 96 and len(target) == 96
        moved = source.points @ t.rotation.T + t.translation
        d = np.linalg.norm(moved[:, None] - target.points[None, :], axis=2)
        assert (d.min(axis=1) < 1e-6).sum() > 20  # transform really aligns

    def test_byte_identical_reruns(self, tmp_path):
        cfg = ScenarioConfig(source_count=64, kept_count=48, seed=9)

        def digest(root: Path) -> list[str]:
            return [hashlib.sha256(p.read_bytes()).hexdigest()
                    for p in sorted(root.rglob("*")) if p.is_file()]

        generate_scenario(tmp_path / "a", "partial", 2, cfg)
        generate_scenario(tmp_path / "b", "partial", 2, cfg)
        assert digest(tmp_path / "a") == digest(tmp_path / "b")

    def test_self_occluded_mode(self, tmp_path):
        cfg = ScenarioConfig(source_count=256, kept_count=192, target_count=128,
                             full_count=1500, seed=3)
        generate_scenario(tmp_path / "so", "self-occluded", 1, cfg)
        source, target, _ = read_pair_dir(tmp_path / "so" / "pair_0000")
        assert len(source) == 256 and len(target) == 128

    def test_unknown_mode_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown scenario mode"):
            generate_scenario(tmp_path / "x", "bogus", 1, ScenarioConfig())

    def test_pair_rng_deterministic_and_distinct(self):
        a = pair_rng(10, 0).uniform(size=4)
        b = pair_rng(10, 0).uniform(size=4)
        c = pair_rng(10, 1).uniform(size=4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
