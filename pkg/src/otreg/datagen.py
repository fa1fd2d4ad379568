"""Synthetic experiment-pair generation.

Two protocols:

* partial crops: subsample a full cloud, transform it by a random rigid
  motion, then independently crop each side to the nearest neighbors of a
  random anchor point, optionally adding clipped Gaussian noise.
* self-occlusion: place a camera on a sphere around the object (look-at),
  z-buffer point splatting keeps the points visible from that viewpoint.

Everything is driven by an explicit seeded generator. Batches use
per-pair generators derived as default_rng(SeedSequence([master_seed,
pair_index])), so any pair can be regenerated in isolation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .geometry import (
    PointCloud,
    RigidTransform,
    apply_transform,
    centroid,
    sample_random_transform,
)


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs for the partial-crop and self-occlusion protocols."""

    source_count: int = 1024
    kept_count: int = 768
    target_count: int = 512
    rot_range_deg: tuple[float, float] = (0.0, 45.0)
    trans_range: tuple[float, float] = (-0.5, 0.5)
    noise_sigma: float = 0.0
    noise_clip: float = 0.05
    gt_threshold: float = 0.05
    full_count: int = 4096  # synthetic full-cloud size for self-occlusion
    seed: int = 0

    def __post_init__(self):
        if self.kept_count > self.source_count:
            raise ValueError("kept_count must not exceed source_count")
        if self.rot_range_deg[0] > self.rot_range_deg[1]:
            raise ValueError("rot_range_deg must be ordered lo <= hi")
        if self.trans_range[0] > self.trans_range[1]:
            raise ValueError("trans_range must be ordered lo <= hi")
        if self.noise_clip < 0 or self.noise_sigma < 0:
            raise ValueError("noise parameters must be nonnegative")


@dataclass(frozen=True)
class CameraConfig:
    """Pinhole camera for the self-occlusion renderer.

    focal is in units of image widths (pixel focal length =
    focal * image_size); the default frames a [-1, 1]-normalized object
    at distance 3 so it spans roughly 80% of the image.
    """

    distance: float = 3.0
    elevation_range_deg: tuple[float, float] = (22.5, 67.5)
    azimuth_range_deg: tuple[float, float] = (22.5, 67.5)
    image_size: int = 128
    focal: float = 0.7

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError("camera distance must be positive")
        for lo, hi in (self.elevation_range_deg, self.azimuth_range_deg):
            if not (0.0 <= lo <= hi <= 90.0):
                raise ValueError("angle ranges must lie within [0, 90] degrees")


def add_clipped_gaussian_noise(pc: PointCloud, sigma: float, clip: float,
                               rng: np.random.Generator) -> PointCloud:
    """Per-coordinate N(0, sigma^2) displacement clamped to [-clip, clip]."""
    if sigma < 0 or clip < 0:
        raise ValueError("sigma and clip must be nonnegative")
    if sigma == 0:
        return pc
    noise = np.clip(rng.normal(0.0, sigma, pc.points.shape), -clip, clip)
    return PointCloud(pc.points + noise, pc.descriptors)


def _crop_to_anchor(points: np.ndarray, kept: int,
                    rng: np.random.Generator) -> np.ndarray:
    anchor = points[rng.integers(len(points))]
    d = np.linalg.norm(points - anchor, axis=1)
    return points[np.argsort(d, kind="stable")[:kept]]


def make_partial_pair(
    full_cloud: PointCloud, cfg: ScenarioConfig, rng: np.random.Generator,
) -> tuple[PointCloud, PointCloud, RigidTransform]:
    """Partial-crop pair: (source, target, ground-truth transform).

    The full cloud is subsampled to source_count points, transformed by a
    freshly sampled rigid motion to form the target, and each side is
    independently cut down to the kept_count nearest neighbors of a random
    anchor point. At noise_sigma 0 the returned transform maps every
    surviving source point exactly onto its target counterpart.
    """
    if len(full_cloud) < cfg.source_count:
        raise ValueError(
            f"insufficient points: need {cfg.source_count}, have {len(full_cloud)}"
        )
    pick = rng.choice(len(full_cloud), size=cfg.source_count, replace=False)
    base = full_cloud.points[pick]
    gt = sample_random_transform(rng, cfg.rot_range_deg, cfg.trans_range)
    moved = base @ gt.rotation.T + gt.translation

    source = PointCloud(_crop_to_anchor(base, cfg.kept_count, rng))
    target = PointCloud(_crop_to_anchor(moved, cfg.kept_count, rng))
    if cfg.noise_sigma > 0:
        source = add_clipped_gaussian_noise(source, cfg.noise_sigma,
                                            cfg.noise_clip, rng)
        target = add_clipped_gaussian_noise(target, cfg.noise_sigma,
                                            cfg.noise_clip, rng)
    return source, target, gt


def _look_at(eye: np.ndarray, center: np.ndarray) -> np.ndarray:
    """World-to-camera rotation; rows are (right, up, forward)."""
    forward = center - eye
    forward = forward / np.linalg.norm(forward)
    world_up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, world_up)
    if np.linalg.norm(right) < 1e-9:  # camera axis parallel to world up
        right = np.cross(forward, np.array([0.0, 1.0, 0.0]))
    right = right / np.linalg.norm(right)
    up = np.cross(right, forward)
    return np.stack([right, up, forward])


def render_self_occluded(
    full_cloud: PointCloud,
    cam: CameraConfig,
    target_count: int,
    rng: np.random.Generator,
) -> PointCloud:
    """Keep the points visible from a random camera pose (z-buffer splat).

    The camera sits at the configured distance from the cloud centroid,
    with elevation/azimuth drawn from the configured ranges, looking at
    the centroid. Points are projected through the pinhole model and
    splatted with radius one pixel into a depth buffer; a point survives
    when nothing nearer claims its own pixel. Survivors (original
    coordinates, never fabricated geometry) are subsampled, or padded by
    resampling, to exactly target_count.
    """
    if len(full_cloud) == 0:
        raise ValueError("empty point set")
    pts = full_cloud.points
    center = centroid(full_cloud)
    el = np.radians(rng.uniform(*cam.elevation_range_deg))
    az = np.radians(rng.uniform(*cam.azimuth_range_deg))
    eye = center + cam.distance * np.array(
        [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
    rot = _look_at(eye, center)

    local = (pts - eye) @ rot.T
    depth = local[:, 2]
    size = cam.image_size
    fpx = cam.focal * size
    in_front = depth > 1e-9
    px = np.full(len(pts), -1, dtype=np.int64)
    py = np.full(len(pts), -1, dtype=np.int64)
    px[in_front] = np.floor(
        fpx * local[in_front, 0] / depth[in_front] + size / 2).astype(np.int64)
    py[in_front] = np.floor(
        fpx * local[in_front, 1] / depth[in_front] + size / 2).astype(np.int64)
    onscreen = in_front & (px >= 0) & (px < size) & (py >= 0) & (py < size)

    zbuf = np.full((size, size), np.inf)
    cand = np.nonzero(onscreen)[0]
    for dx, dy in ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)):
        qx = px[cand] + dx
        qy = py[cand] + dy
        ok = (qx >= 0) & (qx < size) & (qy >= 0) & (qy < size)
        np.minimum.at(zbuf, (qy[ok], qx[ok]), depth[cand[ok]])
    survivors = cand[depth[cand] <= zbuf[py[cand], px[cand]]]

    # tiny clouds legitimately keep fewer than 10 points (see the single-
    # point contract); the degeneracy check targets real scans
    if len(pts) >= 10 and survivors.size < 10:
        raise ValueError(
            f"degenerate viewpoint: only {survivors.size} visible points")
    if survivors.size == 0:
        raise ValueError("degenerate viewpoint: no visible points")
    if survivors.size >= target_count:
        keep = rng.choice(survivors, size=target_count, replace=False)
    else:
        pad = rng.choice(survivors, size=target_count - survivors.size,
                         replace=True)
        keep = np.concatenate([survivors, pad])
    return PointCloud(pts[keep])


def make_self_occluded_pair(
    full_cloud: PointCloud, cfg: ScenarioConfig, cam: CameraConfig,
    rng: np.random.Generator,
) -> tuple[PointCloud, PointCloud, RigidTransform]:
    """Self-occlusion pair: full-cloud subsample vs depth-rendered view."""
    if len(full_cloud) < cfg.source_count:
        raise ValueError(
            f"insufficient points: need {cfg.source_count}, have {len(full_cloud)}"
        )
    pick = rng.choice(len(full_cloud), size=cfg.source_count, replace=False)
    source = PointCloud(full_cloud.points[pick])
    gt = sample_random_transform(rng, cfg.rot_range_deg, cfg.trans_range)
    target = render_self_occluded(apply_transform(gt, full_cloud), cam,
                                  cfg.target_count, rng)
    if cfg.noise_sigma > 0:
        source = add_clipped_gaussian_noise(source, cfg.noise_sigma,
                                            cfg.noise_clip, rng)
        target = add_clipped_gaussian_noise(target, cfg.noise_sigma,
                                            cfg.noise_clip, rng)
    return source, target, gt


def synthetic_shape(rng: np.random.Generator, n: int) -> PointCloud:
    """Random smooth closed surface, normalized to [-1, 1] per axis.

    A unit sphere with a few low-frequency radial bumps; structured enough
    for neighborhood descriptors, asymmetric enough to pin down a unique
    alignment.
    """
    u = rng.normal(size=(n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    radius = np.ones(n)
    for _ in range(4):
        freq = rng.uniform(1.0, 4.0, size=3)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.05, 0.18)
        radius += amp * np.sin((u * freq).sum(axis=1) * np.pi + phase)
    pts = u * radius[:, None]
    pts -= pts.mean(axis=0)
    span = np.abs(pts).max(axis=0)
    return PointCloud(pts / np.maximum(span, 1e-12))


def pair_rng(master_seed: int, pair_index: int) -> np.random.Generator:
    """Deterministic per-pair generator: mixes (master_seed, pair_index)."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, pair_index]))


def write_pair_dir(directory, source: PointCloud, target: PointCloud,
                   gt: RigidTransform) -> None:
    """One pair on disk: source.xyz, target.xyz, transform.json."""
    from .io import save_cloud, save_transform

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_cloud(source, directory / "source.xyz")
    save_cloud(target, directory / "target.xyz")
    save_transform(gt, directory / "transform.json")


def read_pair_dir(directory) -> tuple[PointCloud, PointCloud, RigidTransform]:
    from .io import load_cloud, load_transform

    directory = Path(directory)
    return (load_cloud(directory / "source.xyz"),
            load_cloud(directory / "target.xyz"),
            load_transform(directory / "transform.json"))


def generate_scenario(
    out_dir,
    mode: str,
    pairs: int,
    cfg: ScenarioConfig,
    cam: CameraConfig | None = None,
    full_clouds: list[PointCloud] | None = None,
) -> dict:
    """Write a scenario directory: manifest.json plus pair_NNNN subdirs.

    mode is "partial" or "self-occluded". When no input clouds are given,
    each pair draws a fresh synthetic full cloud. The manifest (written
    before any pair so crashed runs stay reproducible) records the mode,
    config, and the per-pair seed recipe.
    """
    if mode not in ("partial", "self-occluded"):
        raise ValueError(f"unknown scenario mode: {mode}")
    cam = cam or CameraConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "mode": mode,
        "pairs": pairs,
        "master_seed": cfg.seed,
        "pair_seed_recipe": "SeedSequence([master_seed, pair_index])",
        "scenario": asdict(cfg),
        "camera": asdict(cam),
        "inputs": "synthetic" if not full_clouds else len(full_clouds),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)

    for i in range(pairs):
        rng = pair_rng(cfg.seed, i)
        if full_clouds:
            full = full_clouds[i % len(full_clouds)]
        else:
            n = cfg.full_count if mode == "self-occluded" else cfg.source_count
            full = synthetic_shape(rng, max(n, cfg.source_count))
        if mode == "partial":
            source, target, gt = make_partial_pair(full, cfg, rng)
        else:
            source, target, gt = make_self_occluded_pair(full, cfg, cam, rng)
        write_pair_dir(out_dir / f"pair_{i:04d}", source, target, gt)
    return manifest
