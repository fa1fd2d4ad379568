"""Optimal-transport correspondence layer.

The matching problem between two partially overlapping point sets is posed
as entropic optimal transport over a score matrix augmented with one
outlier row and column (the "bins"). Higher descriptor similarity attracts
transport mass: internally the solver minimizes

    <-S_aug, P> - lam * E(P),    E(P) = -sum_ij P_ij (log P_ij - 1)

over the polytope of nonnegative matrices with row sums a = [1,...,1, N]
and column sums b = [1,...,1, M]. All iterations run in the log domain on
dual potentials, so scores of large magnitude cannot overflow; the plan is
exponentiated only once at the end. entropic_objective evaluates the same
signed objective the solver minimizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from .geometry import PointCloud, RigidTransform, transform_points
from .procrustes import CorrespondenceSet

PLAN_LOG_FLOOR = 1e-300  # keeps log() finite if a plan entry underflows


def score_map(source_desc: np.ndarray, target_desc: np.ndarray) -> np.ndarray:
    """Pairwise inner products: S[i, j] = <source_desc[i], target_desc[j]>."""
    fs = np.atleast_2d(np.asarray(source_desc, dtype=np.float64))
    ft = np.atleast_2d(np.asarray(target_desc, dtype=np.float64))
    if fs.shape[1] != ft.shape[1]:
        raise ValueError(
            f"descriptor dimension mismatch: {fs.shape[1]} vs {ft.shape[1]}"
        )
    return fs @ ft.T


@dataclass(frozen=True)
class AugmentedScoreMatrix:
    """(M+1) x (N+1) score matrix whose border row/column hold alpha."""

    values: np.ndarray
    alpha: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 2 or v.shape[1] < 2:
            raise ValueError("augmented matrix must be at least 2x2")
        if not np.isfinite(v).all():
            raise ValueError("scores contain non-finite entries")
        if (v[-1, :] != self.alpha).any() or (v[:, -1] != self.alpha).any():
            raise ValueError("border row/column must equal alpha exactly")
        object.__setattr__(self, "values", v)

    @property
    def interior_shape(self) -> tuple[int, int]:
        return self.values.shape[0] - 1, self.values.shape[1] - 1


def augment(scores: np.ndarray, alpha: float) -> AugmentedScoreMatrix:
    """Append the outlier row and column, all set to alpha."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("score matrix must be 2-D")
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    m, n = s.shape
    out = np.full((m + 1, n + 1), float(alpha))
    out[:m, :n] = s
    return AugmentedScoreMatrix(out, float(alpha))


@dataclass(frozen=True)
class Marginals:
    """Prescribed row/column masses: a = [1,...,1, N], b = [1,...,1, M]."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        m, n = a.shape[0] - 1, b.shape[0] - 1
        if m < 1 or n < 1:
            raise ValueError("marginals require at least one real point per side")
        if (a[:m] != 1).any() or a[m] != n or (b[:n] != 1).any() or b[n] != m:
            raise ValueError("marginals must be [1,...,1, N] and [1,...,1, M]")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @staticmethod
    def for_sizes(m: int, n: int) -> "Marginals":
        a = np.ones(m + 1)
        a[m] = n
        b = np.ones(n + 1)
        b[n] = m
        return Marginals(a, b)


@dataclass(frozen=True)
class SinkhornConfig:
    """Entropy weight and iteration budget for the solver."""

    lam: float = 1.0
    iterations: int = 50
    # early exit on marginal residual; None matches the fixed-k behavior
    early_stop_residual: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


class SinkhornInfo(NamedTuple):
    iterations: int
    marginal_residual: float


def logsumexp(v: np.ndarray, axis: int | None = None) -> np.ndarray | float:
    """log(sum(exp(v))) computed with the max-shift trick.

    Shift-invariant by construction: logsumexp(v + c) == logsumexp(v) + c.
    Entries of -inf are allowed (they contribute zero mass).
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("logsumexp of an empty vector")
    if axis is None:
        v = v.ravel()
        axis = 0
        scalar = True
    else:
        scalar = False
    m = np.max(v, axis=axis, keepdims=True)
    # a slice of all -inf would produce nan from (-inf) - (-inf)
    safe = np.where(np.isfinite(m), m, 0.0)
    out = np.squeeze(safe + np.log(np.sum(np.exp(v - safe), axis=axis,
                                          keepdims=True)), axis=axis)
    return float(out) if scalar else out


def marginal_residual(plan: np.ndarray, m: Marginals) -> float:
    """Largest absolute violation of the prescribed row/column sums."""
    return float(max(np.abs(plan.sum(axis=1) - m.a).max(),
                     np.abs(plan.sum(axis=0) - m.b).max()))


def sinkhorn(
    s: AugmentedScoreMatrix,
    m: Marginals,
    cfg: SinkhornConfig = SinkhornConfig(),
    return_info: bool = False,
):
    """Log-domain Sinkhorn iteration for the augmented matching problem.

    Each iteration performs one row update of the potential f and one
    column update of g; ending on the column update makes the column sums
    exact (up to round-off) while the rows carry the residual. Deterministic
    for fixed inputs. Returns the (M+1) x (N+1) transport plan, plus an
    info tuple when return_info is set.
    """
    mm, nn = s.interior_shape
    if m.a.shape[0] != mm + 1 or m.b.shape[0] != nn + 1:
        raise ValueError("marginals do not match the augmented matrix shape")
    cost = -s.values
    lam = cfg.lam
    loga = lam * np.log(m.a)
    logb = lam * np.log(m.b)
    f = np.zeros(mm + 1)
    g = np.zeros(nn + 1)
    iterations = 0
    for it in range(cfg.iterations):
        f = loga - lam * logsumexp((f[:, None] + g[None, :] - cost) / lam, axis=1) + f
        g = logb - lam * logsumexp((f[:, None] + g[None, :] - cost) / lam, axis=0) + g
        iterations = it + 1
        if cfg.early_stop_residual is not None:
            plan = np.exp((f[:, None] + g[None, :] - cost) / lam)
            if marginal_residual(plan, m) < cfg.early_stop_residual:
                break
    plan = np.exp((f[:, None] + g[None, :] - cost) / lam)
    if not np.isfinite(plan).all():
        raise FloatingPointError("numerical failure: non-finite transport plan")
    if return_info:
        return plan, SinkhornInfo(iterations, marginal_residual(plan, m))
    return plan


def entropic_objective(plan: np.ndarray, s: AugmentedScoreMatrix,
                       lam: float) -> float:
    """<-S_aug, P> - lam * E(P), the quantity the solver minimizes."""
    p = np.asarray(plan, dtype=np.float64)
    if (p <= 0).any():
        raise ValueError("plan entries must be strictly positive")
    entropy = -np.sum(p * (np.log(p) - 1.0))
    return float(np.sum(-s.values * p) - lam * entropy)


class ExtractionResult(NamedTuple):
    correspondences: CorrespondenceSet
    source_outliers: np.ndarray  # real source rows whose argmax hit the bin
    unmatched_targets: np.ndarray  # real target columns no pair selected


def extract_correspondences(plan: np.ndarray,
                            with_weights: bool = False) -> ExtractionResult:
    """Row-argmax assignment over the real source rows.

    A row whose largest mass sits in the outlier column yields no pair and
    is reported as a source outlier. The augmented bottom row is ignored.
    An empty correspondence set is a legal result.
    """
    p = np.asarray(plan, dtype=np.float64)
    m, n = p.shape[0] - 1, p.shape[1] - 1
    best = np.argmax(p[:m, :], axis=1)
    matched = best < n
    src = np.nonzero(matched)[0]
    pairs = np.stack([src, best[src]], axis=1).astype(np.int64)
    weights = p[pairs[:, 0], pairs[:, 1]] if with_weights and len(pairs) else None
    corr = CorrespondenceSet(pairs.reshape(-1, 2), weights)
    outliers = np.nonzero(~matched)[0].astype(np.int64)
    used = np.zeros(n, dtype=bool)
    if len(pairs):
        used[pairs[:, 1]] = True
    return ExtractionResult(corr, outliers, np.nonzero(~used)[0].astype(np.int64))


def build_ground_truth(source: PointCloud, target: PointCloud,
                       t: RigidTransform, threshold: float = 0.05) -> np.ndarray:
    """Binary (M+1) x (N+1) correspondence matrix from a known transform.

    Transformed source points within `threshold` of a target point are
    marked correspondences; rows/columns left empty get a 1 in their
    outlier bin. The bin-bin corner stays 0.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    moved = transform_points(t, source.points)
    d = cdist(moved, target.points)
    inner = d <= threshold
    m, n = inner.shape
    gt = np.zeros((m + 1, n + 1), dtype=np.int8)
    gt[:m, :n] = inner
    gt[:m, n] = ~inner.any(axis=1)
    gt[m, :n] = ~inner.any(axis=0)
    return gt


def nll_loss(plan: np.ndarray, gt: np.ndarray) -> float:
    """Mean negative log plan mass over the ground-truth positions.

    A plan entry that underflowed to zero contributes a large finite value
    rather than +inf (log-domain solves make this unreachable in practice).
    """
    p = np.asarray(plan, dtype=np.float64)
    g = np.asarray(gt)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: plan {p.shape} vs ground truth {g.shape}")
    mask = g != 0
    total = int(mask.sum())
    if total == 0:
        raise ValueError("empty ground truth")
    # + 0.0 normalizes the -0.0 a perfect plan would otherwise produce
    return float(-np.log(np.maximum(p[mask], PLAN_LOG_FLOOR)).sum() / total) + 0.0


def nll_score_sensitivity(
    scores: np.ndarray,
    gt: np.ndarray,
    entries: np.ndarray,
    alpha: float = 0.0,
    cfg: SinkhornConfig = SinkhornConfig(),
    step: float = 1e-4,
) -> np.ndarray:
    """Central finite differences of the assignment loss w.r.t. score entries.

    entries is an (K, 2) array of interior indices. The whole pipeline
    (augment -> sinkhorn -> nll_loss) is differentiable, so the estimates
    are finite and stable in the step size.
    """
    s = np.asarray(scores, dtype=np.float64)
    entries = np.asarray(entries, dtype=np.int64).reshape(-1, 2)
    m = Marginals.for_sizes(*s.shape)

    def loss_at(mat: np.ndarray) -> float:
        return nll_loss(sinkhorn(augment(mat, alpha), m, cfg), gt)

    grads = np.empty(entries.shape[0])
    for k, (i, j) in enumerate(entries):
        bumped = s.copy()
        bumped[i, j] = s[i, j] + step
        hi = loss_at(bumped)
        bumped[i, j] = s[i, j] - step
        lo = loss_at(bumped)
        grads[k] = (hi - lo) / (2.0 * step)
    return grads
