"""Core 3D types: point clouds, Euler angles, rigid transforms.

All types are immutable after construction (arrays are marked read-only),
so instances can be shared freely across threads. Operations are pure;
the only stateful object is the caller-owned random generator.

Euler convention: intrinsic Z-Y-X (yaw about z, then pitch about the new y,
then roll about the new x), angles in degrees. Equivalently, as matrices,
R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHONORMALITY_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointCloud:
    """Ordered set of 3D points with optional per-point descriptors."""

    points: np.ndarray
    descriptors: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("points contain non-finite coordinates")
        object.__setattr__(self, "points", _readonly(pts))
        if self.descriptors is not None:
            desc = np.asarray(self.descriptors, dtype=np.float64)
            if desc.ndim != 2 or desc.shape[0] != pts.shape[0]:
                raise ValueError(
                    f"descriptors must have shape (N, P) with N={pts.shape[0]}, "
                    f"got {desc.shape}"
                )
            if desc.shape[1] < 1:
                raise ValueError("descriptor dimension must be >= 1")
            object.__setattr__(self, "descriptors", _readonly(desc))

    def __len__(self) -> int:
        return self.points.shape[0]

    def with_descriptors(self, descriptors: np.ndarray) -> "PointCloud":
        return PointCloud(self.points, descriptors)


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion: rotation matrix (det = +1) plus translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if np.abs(r.T @ r - np.eye(3)).max() > ORTHONORMALITY_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHONORMALITY_TOL:
            raise ValueError("rotation determinant is not +1 (improper rotation)")
        object.__setattr__(self, "rotation", _readonly(r))
        object.__setattr__(self, "translation", _readonly(t))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class EulerAngles:
    """Intrinsic Z-Y-X angles in degrees: yaw (z), pitch (y), roll (x)."""

    yaw: float
    pitch: float
    roll: float

    def as_array(self) -> np.ndarray:
        return np.array([self.yaw, self.pitch, self.roll], dtype=np.float64)


def apply_transform(t: RigidTransform, pc: PointCloud) -> PointCloud:
    """Map every point through R x + trans; descriptors are carried over."""
    moved = pc.points @ t.rotation.T + t.translation
    return PointCloud(moved, pc.descriptors)


def transform_points(t: RigidTransform, points: np.ndarray) -> np.ndarray:
    """Array-level variant of apply_transform for (N, 3) inputs."""
    return np.asarray(points, dtype=np.float64) @ t.rotation.T + t.translation


def compose(t1: RigidTransform, t2: RigidTransform) -> RigidTransform:
    """Transform equal to applying t2 first, then t1."""
    return RigidTransform(t1.rotation @ t2.rotation,
                          t1.rotation @ t2.translation + t1.translation)


def invert(t: RigidTransform) -> RigidTransform:
    rt = t.rotation.T
    return RigidTransform(rt, -rt @ t.translation)


def rotation_from_euler(e: EulerAngles) -> np.ndarray:
    """Build the rotation matrix Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    a, b, c = np.radians([e.yaw, e.pitch, e.roll])
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cc, sc = np.cos(c), np.sin(c)
    return np.array([
        [ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc],
        [sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc],
        [-sb, cb * sc, cb * cc],
    ])


def euler_from_rotation(r: np.ndarray) -> EulerAngles:
    """Extract intrinsic Z-Y-X angles in degrees.

    At gimbal lock (|pitch| = 90 deg) yaw and roll are not separable;
    the convention here is roll = 0 with the remaining freedom folded
    into yaw. Never raises for a valid rotation matrix.
    """
    r = np.asarray(r, dtype=np.float64)
    s = -r[2, 0]
    if abs(s) >= 1.0 - 1e-12:
        pitch = np.copysign(np.pi / 2, s)
        yaw = np.arctan2(-r[0, 1], r[1, 1])
        roll = 0.0
    else:
        pitch = np.arcsin(s)
        yaw = np.arctan2(r[1, 0], r[0, 0])
        roll = np.arctan2(r[2, 1], r[2, 2])
    return EulerAngles(float(np.degrees(yaw)), float(np.degrees(pitch)),
                       float(np.degrees(roll)))


def sample_random_transform(
    rng: np.random.Generator,
    rot_range_deg: tuple[float, float] = (0.0, 45.0),
    trans_range: tuple[float, float] = (-0.5, 0.5),
) -> RigidTransform:
    """Draw per-axis Euler angles and translation components uniformly.

    Draw order is fixed (yaw, pitch, roll, then tx, ty, tz) so a seeded
    generator reproduces the same transform on every platform.
    """
    rlo, rhi = rot_range_deg
    tlo, thi = trans_range
    if rlo > rhi or tlo > thi:
        raise ValueError("ranges must satisfy lo <= hi")
    yaw, pitch, roll = rng.uniform(rlo, rhi, 3)
    translation = rng.uniform(tlo, thi, 3)
    rot = rotation_from_euler(EulerAngles(yaw, pitch, roll))
    return RigidTransform(rot, translation)


def centroid(pc: PointCloud) -> np.ndarray:
    if len(pc) == 0:
        raise ValueError("empty point set")
    return pc.points.mean(axis=0)
