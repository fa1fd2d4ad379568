"""Rotation/translation error metrics pooled over a batch of pairs.

Pooling formula: for every evaluated pair, the three per-axis differences
between predicted and ground-truth Euler angles (intrinsic Z-Y-X, degrees)
and the three translation component differences enter one common pool per
quantity; MSE, RMSE and MAE are computed over that pool. Because the
per-axis convention is not universal, the convention-free geodesic
rotation error is always reported alongside.

Failed registrations are excluded from the pools and counted in
n_failures; strict mode scores them as identity predictions instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import RigidTransform, euler_from_rotation

CSV_COLUMNS = ["model", "mse_r", "rmse_r", "mae_r",
               "mse_t", "rmse_t", "mae_t", "n", "failures"]

POOLING_NOTE = (
    "rotation errors: per-axis differences of intrinsic Z-Y-X Euler angles "
    "(degrees); translation errors: per-axis component differences; "
    "MSE/RMSE/MAE pooled over all axes and pairs; geodesic column: mean "
    "rotation angle between prediction and ground truth (degrees)."
)


@dataclass(frozen=True)
class MetricReport:
    mse_r: float
    rmse_r: float
    mae_r: float
    mse_t: float
    rmse_t: float
    mae_t: float
    n_pairs: int
    n_failures: int
    mae_geodesic_deg: float


def geodesic_rotation_error(r_pred: np.ndarray, r_gt: np.ndarray) -> float:
    """Angle of the relative rotation, in degrees, within [0, 180].

    Equivalent to arccos((trace - 1) / 2) but evaluated through atan2 of
    the skew part, which stays accurate for angles far below the arccos
    resolution floor (about 1e-8 radians in double precision).
    """
    rel = np.asarray(r_gt).T @ np.asarray(r_pred)
    c = np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)
    skew = 0.5 * np.array([rel[2, 1] - rel[1, 2],
                           rel[0, 2] - rel[2, 0],
                           rel[1, 0] - rel[0, 1]])
    return float(np.degrees(np.arctan2(np.linalg.norm(skew), c)))


def evaluate(
    predictions: list[RigidTransform | None],
    ground_truths: list[RigidTransform],
    strict: bool = False,
) -> MetricReport:
    """Pooled MSE/RMSE/MAE over rotation (degrees) and translation."""
    if len(predictions) != len(ground_truths):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions vs "
            f"{len(ground_truths)} ground truths"
        )
    if not predictions:
        raise ValueError("nothing to evaluate")

    rot_diffs: list[np.ndarray] = []
    trans_diffs: list[np.ndarray] = []
    geodesics: list[float] = []
    failures = 0
    for pred, gt in zip(predictions, ground_truths):
        if pred is None:
            failures += 1
            if not strict:
                continue
            pred = RigidTransform.identity()
        e_pred = euler_from_rotation(pred.rotation).as_array()
        e_gt = euler_from_rotation(gt.rotation).as_array()
        rot_diffs.append(e_pred - e_gt)
        trans_diffs.append(pred.translation - gt.translation)
        geodesics.append(geodesic_rotation_error(pred.rotation, gt.rotation))

    if not rot_diffs:
        return MetricReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                            len(predictions), failures, 0.0)
    r = np.concatenate(rot_diffs)
    t = np.concatenate(trans_diffs)
    mse_r = float(np.mean(r * r))
    mse_t = float(np.mean(t * t))
    return MetricReport(
        mse_r=mse_r, rmse_r=float(np.sqrt(mse_r)), mae_r=float(np.mean(np.abs(r))),
        mse_t=mse_t, rmse_t=float(np.sqrt(mse_t)), mae_t=float(np.mean(np.abs(t))),
        n_pairs=len(predictions), n_failures=failures,
        mae_geodesic_deg=float(np.mean(geodesics)))


def format_table(rows: list[tuple[str, MetricReport]]) -> str:
    """Aligned plain-text report with the pooling formula in the header."""
    header = ["model", "mse_r", "rmse_r", "mae_r", "mse_t", "rmse_t",
              "mae_t", "geo_mae", "n", "failures"]
    body = []
    for name, rep in rows:
        body.append([
            name,
            f"{rep.mse_r:.6g}", f"{rep.rmse_r:.6g}", f"{rep.mae_r:.6g}",
            f"{rep.mse_t:.6g}", f"{rep.rmse_t:.6g}", f"{rep.mae_t:.6g}",
            f"{rep.mae_geodesic_deg:.6g}", str(rep.n_pairs),
            str(rep.n_failures),
        ])
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) if body
              else len(header[i]) for i in range(len(header))]
    lines = [f"# {POOLING_NOTE}"]
    lines.append("  ".join(h.ljust(widths[i]) for i, h in enumerate(header)))
    for r in body:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(r))))
    return "\n".join(lines)


def write_csv(rows: list[tuple[str, MetricReport]], path) -> None:
    """One row per method; fixed column set."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for name, rep in rows:
            writer.writerow([
                name, repr(rep.mse_r), repr(rep.rmse_r), repr(rep.mae_r),
                repr(rep.mse_t), repr(rep.rmse_t), repr(rep.mae_t),
                rep.n_pairs, rep.n_failures,
            ])
