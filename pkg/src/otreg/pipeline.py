"""End-to-end registration: one-shot OT matching and the ICP baseline.

register_ot runs descriptors -> score map -> outlier-bin augmentation ->
Sinkhorn -> row-argmax extraction -> Procrustes, exactly once per call.
register_icp alternates exact nearest-neighbor pairing with the same
Procrustes solver until the transform stops moving.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .descriptors import DescriptorProvider
from .geometry import PointCloud, RigidTransform, transform_points
from .procrustes import CorrespondenceSet, solve_procrustes
from .transport import (
    Marginals,
    SinkhornConfig,
    augment,
    extract_correspondences,
    score_map,
    sinkhorn,
)


@dataclass(frozen=True)
class IcpConfig:
    max_iterations: int = 50
    convergence_eps: float = 1e-6
    max_pair_distance: float | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.convergence_eps > 0:
            raise ValueError("convergence_eps must be positive")


@dataclass(frozen=True)
class RegistrationResult:
    """Estimated transform plus correspondence/solver diagnostics.

    transform is None exactly when the run failed; failure_reason then
    says why. marginal_residual is filled by the OT path, convergence_delta
    by ICP. No field is ever NaN.
    """

    transform: RigidTransform | None
    correspondences: CorrespondenceSet | None
    num_source_outliers: int
    num_target_rows_unused: int
    solver_iterations: int
    marginal_residual: float | None = None
    convergence_delta: float | None = None
    degenerate_stop: bool = False
    failure_reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.transform is not None

    @staticmethod
    def failure(reason: str, num_source_outliers: int = 0,
                num_target_rows_unused: int = 0,
                solver_iterations: int = 0) -> "RegistrationResult":
        return RegistrationResult(
            transform=None, correspondences=None,
            num_source_outliers=num_source_outliers,
            num_target_rows_unused=num_target_rows_unused,
            solver_iterations=solver_iterations, failure_reason=reason)


def register_ot(
    source: PointCloud,
    target: PointCloud,
    provider: DescriptorProvider,
    alpha: float = 0.0,
    cfg: SinkhornConfig = SinkhornConfig(),
    weight_by_plan: bool = False,
    refine_icp: bool = False,
) -> RegistrationResult:
    """One-shot optimal-transport registration.

    Performs exactly one Sinkhorn solve and one Procrustes solve. Hard
    (uniform-weight) assignment unless weight_by_plan is set, in which
    case each pair is weighted by its plan mass. refine_icp appends a
    single ICP pass and is off in every benchmark preset.
    """
    if len(source) == 0 or len(target) == 0:
        return RegistrationResult.failure("empty point cloud")
    src_desc, tgt_desc = provider.describe(source, target)
    if src_desc.shape[0] != len(source) or tgt_desc.shape[0] != len(target):
        raise ValueError("provider returned a descriptor count mismatch")
    scores = score_map(src_desc, tgt_desc)
    aug = augment(scores, alpha)
    plan, info = sinkhorn(aug, Marginals.for_sizes(*scores.shape), cfg,
                          return_info=True)
    extraction = extract_correspondences(plan, with_weights=weight_by_plan)
    corr = extraction.correspondences
    n_out = int(extraction.source_outliers.size)
    n_unused = int(extraction.unmatched_targets.size)
    if len(corr) < 3:
        return RegistrationResult.failure(
            "fewer than 3 correspondences after outlier filtering",
            n_out, n_unused, info.iterations)
    try:
        estimate = solve_procrustes(source, target, corr)
    except ValueError as exc:
        return RegistrationResult.failure(str(exc), n_out, n_unused,
                                          info.iterations)
    if refine_icp:
        refined = register_icp(source, target, init=estimate,
                               cfg=IcpConfig(max_iterations=1))
        if refined.ok:
            estimate = refined.transform
    return RegistrationResult(
        transform=estimate, correspondences=corr,
        num_source_outliers=n_out, num_target_rows_unused=n_unused,
        solver_iterations=info.iterations,
        marginal_residual=info.marginal_residual)


def _transform_delta(t_new: RigidTransform, t_old: RigidTransform,
                     points: np.ndarray) -> float:
    """Largest displacement of any source point between two estimates."""
    moved_new = points @ t_new.rotation.T + t_new.translation
    moved_old = points @ t_old.rotation.T + t_old.translation
    return float(np.linalg.norm(moved_new - moved_old, axis=1).max())


def register_icp(
    source: PointCloud,
    target: PointCloud,
    init: RigidTransform | None = None,
    cfg: IcpConfig = IcpConfig(),
) -> RegistrationResult:
    """Vanilla iterative-closest-point baseline.

    Each round pairs every source point with its exact nearest target
    point (pairs beyond max_pair_distance dropped when configured), then
    re-solves Procrustes from scratch. Stops when the largest per-point
    motion between successive estimates falls below convergence_eps. A
    degenerate Procrustes round terminates with the last valid transform
    and degenerate_stop set.
    """
    if len(source) == 0 or len(target) == 0:
        return RegistrationResult.failure("empty point cloud")
    tree = cKDTree(target.points)
    estimate = RigidTransform.identity() if init is None else init
    corr = None
    n_dropped = 0
    delta = float("inf")
    degenerate = False
    iterations = 0
    for it in range(cfg.max_iterations):
        iterations = it + 1
        moved = transform_points(estimate, source.points)
        dist, idx = tree.query(moved, k=1)
        keep = np.ones(len(source), dtype=bool)
        if cfg.max_pair_distance is not None:
            keep = dist <= cfg.max_pair_distance
        n_dropped = int((~keep).sum())
        pairs = np.stack([np.nonzero(keep)[0], idx[keep]], axis=1)
        corr = CorrespondenceSet(pairs.reshape(-1, 2).astype(np.int64))
        if len(corr) < 3:
            degenerate = True
            break
        try:
            new_estimate = solve_procrustes(source, target, corr)
        except ValueError:
            degenerate = True
            break
        delta = _transform_delta(new_estimate, estimate, source.points)
        estimate = new_estimate
        if delta < cfg.convergence_eps:
            break
    used = np.zeros(len(target), dtype=bool)
    if corr is not None and len(corr):
        used[corr.pairs[:, 1]] = True
    return RegistrationResult(
        transform=estimate, correspondences=corr,
        num_source_outliers=n_dropped,
        num_target_rows_unused=int((~used).sum()),
        solver_iterations=iterations,
        convergence_delta=None if delta == float("inf") else delta,
        degenerate_stop=degenerate)
