import csv

import numpy as np
import pytest

from otreg.geometry import (
    EulerAngles,
    RigidTransform,
    euler_from_rotation,
    rotation_from_euler,
    sample_random_transform,
)
from otreg.metrics import (
    CSV_COLUMNS,
    evaluate,
    format_table,
    geodesic_rotation_error,
    write_csv,
)


def random_transforms(rng, n):
    return [sample_random_transform(rng, (0, 45), (-0.5, 0.5)) for _ in range(n)]


class TestEvaluate:
    def test_perfect_predictions_all_zero(self):
        rng = np.random.default_rng(80)
        gts = random_transforms(rng, 5)
        rep = evaluate(list(gts), gts)
        assert (rep.mse_r, rep.rmse_r, rep.mae_r) == (0, 0, 0)
        assert (rep.mse_t, rep.rmse_t, rep.mae_t) == (0, 0, 0)
        assert rep.n_pairs == 5 and rep.n_failures == 0

    def test_single_axis_degree_offset_hand_values(self):
        gt = RigidTransform.identity()
        pred = RigidTransform(rotation_from_euler(EulerAngles(1.0, 0, 0)),
                              np.zeros(3))
        rep = evaluate([pred], [gt])
        assert abs(rep.mae_r - 1.0 / 3.0) < 1e-9
        assert abs(rep.mse_r - 1.0 / 3.0) < 1e-9
        assert abs(rep.rmse_r - (1.0 / 3.0) ** 0.5) < 1e-9
        assert rep.mse_t == 0.0

    def test_matches_double_loop_reference(self):
        rng = np.random.default_rng(81)
        gts = random_transforms(rng, 12)
        preds = random_transforms(rng, 12)
        rep = evaluate(list(preds), gts)

        rot_sq = rot_abs = trans_sq = trans_abs = 0.0
        count = 0
        for p, g in zip(preds, gts):
            ep = euler_from_rotation(p.rotation).as_array()
            eg = euler_from_rotation(g.rotation).as_array()
            for k in range(3):
                rot_sq += (ep[k] - eg[k]) ** 2
                rot_abs += abs(ep[k] - eg[k])
                trans_sq += (p.translation[k] - g.translation[k]) ** 2
                trans_abs += abs(p.translation[k] - g.translation[k])
                count += 1
        assert abs(rep.mse_r - rot_sq / count) < 1e-9
        assert abs(rep.mae_r - rot_abs / count) < 1e-9
        assert abs(rep.mse_t - trans_sq / count) < 1e-12
        assert abs(rep.mae_t - trans_abs / count) < 1e-12

    def test_failures_excluded_but_counted(self):
        rng = np.random.default_rng(82)
        gts = random_transforms(rng, 4)
        preds = [gts[0], None, gts[2], None]
        rep = evaluate(preds, gts)
        assert rep.n_failures == 2
        assert rep.n_pairs == 4
        assert rep.mae_r == 0.0  # the two evaluated pairs are perfect

    def test_strict_mode_scores_failures_as_identity(self):
        rng = np.random.default_rng(83)
        gts = random_transforms(rng, 3)
        rep = evaluate([None, None, None], gts, strict=True)
        assert rep.n_failures == 3
        assert rep.mae_r > 0.0

    def test_all_failures_nonstrict(self):
        rng = np.random.default_rng(84)
        gts = random_transforms(rng, 2)
        rep = evaluate([None, None], gts)
        assert rep.n_failures == 2 and rep.mae_r == 0.0

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(85)
        gts = random_transforms(rng, 8)
        preds = random_transforms(rng, 8)
        rep1 = evaluate(list(preds), gts)
        order = rng.permutation(8)
        rep2 = evaluate([preds[i] for i in order], [gts[i] for i in order])
        assert abs(rep1.mse_r - rep2.mse_r) < 1e-12
        assert abs(rep1.mae_t - rep2.mae_t) < 1e-15

    def test_internal_consistency(self):
        rng = np.random.default_rng(86)
        rep = evaluate(random_transforms(rng, 10), random_transforms(rng, 10))
        assert abs(rep.rmse_r ** 2 - rep.mse_r) <= 1e-9 * max(rep.mse_r, 1)
        assert abs(rep.rmse_t ** 2 - rep.mse_t) <= 1e-9 * max(rep.mse_t, 1)
        assert rep.mae_r <= rep.rmse_r + 1e-12
        assert rep.mae_t <= rep.rmse_t + 1e-12

    def test_length_mismatch(self):
        rng = np.random.default_rng(87)
        with pytest.raises(ValueError, match="length mismatch"):
            evaluate(random_transforms(rng, 2), random_transforms(rng, 3))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            evaluate([], [])


class TestGeodesicRotationError:
    def test_identical_is_zero(self):
        rng = np.random.default_rng(88)
        r = sample_random_transform(rng).rotation
        assert geodesic_rotation_error(r, r) < 1e-12

    def test_half_turn_is_180(self):
        r = rotation_from_euler(EulerAngles(180.0, 0, 0))
        assert abs(geodesic_rotation_error(r, np.eye(3)) - 180.0) < 1e-9

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(89)
        for _ in range(25):
            a = sample_random_transform(rng, (-180, 180), (0, 0)).rotation
            b = sample_random_transform(rng, (-180, 180), (0, 0)).rotation
            ab = geodesic_rotation_error(a, b)
            ba = geodesic_rotation_error(b, a)
            assert abs(ab - ba) < 1e-9
            assert 0.0 <= ab <= 180.0

    def test_small_angles_resolved(self):
        r = rotation_from_euler(EulerAngles(1e-7, 0, 0))
        err = geodesic_rotation_error(r, np.eye(3))
        assert abs(err - 1e-7) < 1e-10


class TestReportOutput:
    def test_table_contains_formula_and_rows(self):
        rng = np.random.default_rng(90)
        rep = evaluate(random_transforms(rng, 3), random_transforms(rng, 3))
        text = format_table([("ot", rep), ("icp", rep)])
        lines = text.splitlines()
        assert lines[0].startswith("#")  # pooling formula header
        assert "geo_mae" in lines[1]
        assert sum(ln.startswith("ot") for ln in lines) == 1
        assert sum(ln.startswith("icp") for ln in lines) == 1

    def test_csv_columns_exact(self, tmp_path):
        rng = np.random.default_rng(91)
        rep = evaluate(random_transforms(rng, 3), random_transforms(rng, 3))
        path = tmp_path / "metrics.csv"
        write_csv([("ot", rep)], path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == CSV_COLUMNS
        assert rows[0] == ["model", "mse_r", "rmse_r", "mae_r",
                           "mse_t", "rmse_t", "mae_t", "n", "failures"]
        assert len(rows) == 2
        assert rows[1][0] == "ot"
        assert float(rows[1][1]) == rep.mse_r
