import numpy as np
import pytest

from otreg.geometry import PointCloud, sample_random_transform
from otreg.io import (
    CloudFormatError,
    load_cloud,
    load_transform,
    save_cloud,
    save_transform,
)


class TestXyz:
    def test_three_line_file(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("0 0 0\n1.5 2 3\n-1 -2 -3\n")
        pc = load_cloud(p)
        np.testing.assert_array_equal(
            pc.points, [[0, 0, 0], [1.5, 2, 3], [-1, -2, -3]])

    def test_round_trip_precision(self, tmp_path):
        rng = np.random.default_rng(92)
        pc = PointCloud(rng.uniform(-1, 1, (50, 3)))
        path = tmp_path / "r.xyz"
        save_cloud(pc, path)
        np.testing.assert_allclose(load_cloud(path).points, pc.points, atol=1e-8)

    def test_order_preserved(self, tmp_path):
        pts = np.array([[3, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
        path = tmp_path / "o.xyz"
        save_cloud(PointCloud(pts), path)
        np.testing.assert_array_equal(load_cloud(path).points, pts)

    def test_bad_row_names_line(self, tmp_path):
        p = tmp_path / "bad.xyz"
        p.write_text("0 0 0\n1 2\n")
        with pytest.raises(CloudFormatError, match=":2:"):
            load_cloud(p)

    def test_bad_value_names_line(self, tmp_path):
        p = tmp_path / "bad2.xyz"
        p.write_text("0 0 0\n0 0 0\nx y z\n")
        with pytest.raises(CloudFormatError, match=":3:"):
            load_cloud(p)


class TestOff:
    def test_vertices_loaded_faces_ignored(self, tmp_path):
        p = tmp_path / "m.off"
        p.write_text("OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 2 3\n")
        pc = load_cloud(p)
        assert len(pc) == 4
        np.testing.assert_array_equal(pc.points[3], [0, 0, 1])

    def test_single_line_header_variant(self, tmp_path):
        p = tmp_path / "m2.off"
        p.write_text("OFF 2 0 0\n0 0 0\n5 5 5\n")
        assert len(load_cloud(p)) == 2

    def test_missing_header(self, tmp_path):
        p = tmp_path / "x.off"
        p.write_text("4 2 0\n0 0 0\n")
        with pytest.raises(CloudFormatError, match="OFF header"):
            load_cloud(p)

    def test_truncated_vertices(self, tmp_path):
        p = tmp_path / "t.off"
        p.write_text("OFF\n5 0 0\n0 0 0\n1 1 1\n")
        with pytest.raises(CloudFormatError, match="expected 5 vertices"):
            load_cloud(p)


class TestPly:
    def test_ascii_vertices_with_extra_properties(self, tmp_path):
        p = tmp_path / "m.ply"
        p.write_text(
            "ply\nformat ascii 1.0\ncomment test\n"
            "element vertex 2\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property float nx\nproperty float ny\nproperty float nz\n"
            "element face 1\nproperty list uchar int vertex_indices\n"
            "end_header\n"
            "0 0 0 1 0 0\n"
            "1 2 3 0 1 0\n"
            "3 0 1 0\n")
        pc = load_cloud(p)
        assert len(pc) == 2
        np.testing.assert_array_equal(pc.points[1], [1, 2, 3])

    def test_property_order_respected(self, tmp_path):
        p = tmp_path / "swap.ply"
        p.write_text(
            "ply\nformat ascii 1.0\nelement vertex 1\n"
            "property float z\nproperty float x\nproperty float y\n"
            "end_header\n"
            "3 1 2\n")
        np.testing.assert_array_equal(load_cloud(p).points[0], [1, 2, 3])

    def test_binary_rejected(self, tmp_path):
        p = tmp_path / "b.ply"
        p.write_text("ply\nformat binary_little_endian 1.0\n"
                     "element vertex 1\nproperty float x\nproperty float y\n"
                     "property float z\nend_header\n")
        with pytest.raises(CloudFormatError, match="ascii"):
            load_cloud(p)

    def test_missing_xyz_property(self, tmp_path):
        p = tmp_path / "noz.ply"
        p.write_text("ply\nformat ascii 1.0\nelement vertex 1\n"
                     "property float x\nproperty float y\nend_header\n1 2\n")
        with pytest.raises(CloudFormatError, match="x/y/z"):
            load_cloud(p)


class TestMisc:
    def test_unsupported_extension(self, tmp_path):
        p = tmp_path / "c.pcd"
        p.write_text("")
        with pytest.raises(CloudFormatError, match="unsupported extension"):
            load_cloud(p)

    def test_transform_round_trip(self, tmp_path):
        t = sample_random_transform(np.random.default_rng(93))
        path = tmp_path / "t.json"
        save_transform(t, path)
        back = load_transform(path)
        np.testing.assert_allclose(back.rotation, t.rotation, atol=1e-15)
        np.testing.assert_allclose(back.translation, t.translation, atol=1e-15)
