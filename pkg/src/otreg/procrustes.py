"""Closed-form weighted least-squares rigid alignment from correspondences.

Given paired points, the optimal rotation comes from the SVD of the
cross-covariance matrix of the centered sets, with the reflection case
repaired through the sign of det(U V^T). Weights are an extension beyond
the unweighted formulation; with unit weights the two coincide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud, RigidTransform, _readonly

DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class CorrespondenceSet:
    """Index pairs (source_index, target_index) with optional weights."""

    pairs: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "pairs", p)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
            if w.shape[0] != p.shape[0]:
                raise ValueError("one weight per pair required")
            if not np.isfinite(w).all() or (w < 0).any():
                raise ValueError("weights must be finite and nonnegative")
            if w.sum() <= 0:
                raise ValueError("weights must have positive sum")
            object.__setattr__(self, "weights", _readonly(w))

    def __len__(self) -> int:
        return self.pairs.shape[0]

    @staticmethod
    def identity(n: int) -> "CorrespondenceSet":
        idx = np.arange(n, dtype=np.int64)
        return CorrespondenceSet(np.stack([idx, idx], axis=1))


def _gather(source: PointCloud, target: PointCloud, c: CorrespondenceSet):
    if len(c) == 0:
        raise ValueError("underdetermined: no correspondences")
    si, ti = c.pairs[:, 0], c.pairs[:, 1]
    if si.min() < 0 or si.max() >= len(source):
        raise ValueError("source index out of bounds")
    if ti.min() < 0 or ti.max() >= len(target):
        raise ValueError("target index out of bounds")
    x = source.points[si]
    y = target.points[ti]
    w = np.ones(len(c)) if c.weights is None else c.weights
    return x, y, w


def cross_covariance(source: PointCloud, target: PointCloud,
                     c: CorrespondenceSet) -> np.ndarray:
    """H = sum_i w_i (x_i - x_bar)(y_i - y_bar)^T with weighted centroids."""
    x, y, w = _gather(source, target, c)
    wsum = w.sum()
    xbar = (w[:, None] * x).sum(axis=0) / wsum
    ybar = (w[:, None] * y).sum(axis=0) / wsum
    return (w[:, None] * (x - xbar)).T @ (y - ybar)


def solve_procrustes(source: PointCloud, target: PointCloud,
                     c: CorrespondenceSet) -> RigidTransform:
    """Best rigid transform mapping paired source points onto target points.

    Raises ValueError("underdetermined") for fewer than 3 pairs and
    ValueError("degenerate configuration") when the paired source points
    are collinear or coincident (two smallest singular values of the
    cross-covariance below 1e-12).
    """
    if len(c) < 3:
        raise ValueError("underdetermined: need at least 3 correspondences")
    x, y, w = _gather(source, target, c)
    wsum = w.sum()
    xbar = (w[:, None] * x).sum(axis=0) / wsum
    ybar = (w[:, None] * y).sum(axis=0) / wsum
    h = (w[:, None] * (x - xbar)).T @ (y - ybar)

    u, s, vt = np.linalg.svd(h)
    if s[1] < DEGENERACY_TOL:
        raise ValueError("degenerate configuration: collinear or coincident points")
    d = np.sign(np.linalg.det(u @ vt))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    trans = -rot @ xbar + ybar
    return RigidTransform(rot, trans)


def mean_squared_residual(source: PointCloud, target: PointCloud,
                          c: CorrespondenceSet, t: RigidTransform) -> float:
    """Average squared alignment error of t over the correspondence set."""
    x, y, w = _gather(source, target, c)
    r = x @ t.rotation.T + t.translation - y
    return float((w * (r * r).sum(axis=1)).sum() / w.sum())
