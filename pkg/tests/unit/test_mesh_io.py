"""
Tests for OFF and legacy VTK reading/writing.
"""
import numpy as np
import pytest

from isoflow.errors import ExportError
from isoflow.fem.refgeom import Ellipsoid
from isoflow.mesh.io import read_off, read_vtk_polydata, write_off, write_vtk_mesh, write_vtk_polydata
from isoflow.mesh.surface import build_icosphere, mesh_on_manifold


class TestOff:
    """OFF reference meshes."""

    def test_round_trip(self, tmp_path):
        mesh = mesh_on_manifold(build_icosphere(1), Ellipsoid((0.5, 0.5, 1.0)))
        path = write_off(mesh, tmp_path / "mesh.off")
        back = read_off(path)
        assert np.array_equal(back.vertices, mesh.vertices)
        assert np.array_equal(back.triangles, mesh.triangles)
        assert back.n_edges == mesh.n_edges

    def test_header(self, tmp_path):
        path = write_off(build_icosphere(0), tmp_path / "ico.off")
        lines = path.read_text().splitlines()
        assert lines[0] == "OFF"
        assert lines[1] == "12 20 30"

    def test_not_an_off_file(self, tmp_path):
        path = tmp_path / "bad.off"
        path.write_text("PLY\n1 2 3\n")
        with pytest.raises(ExportError):
            read_off(path)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "short.off"
        path.write_text("OFF\n4 4 6\n0 0 0\n")
        with pytest.raises(ExportError):
            read_off(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ExportError):
            read_off(tmp_path / "nope.off")


class TestVtk:
    """Legacy ASCII POLYDATA."""

    def test_points_reproduced_bitwise(self, tmp_path):
        rng = np.random.default_rng(3)
        points = rng.standard_normal((7, 3)) * np.array([1e-9, 1.0, 1e9])
        triangles = np.array([[0, 1, 2], [2, 3, 4], [4, 5, 6]])
        path = write_vtk_polydata(points, triangles, tmp_path / "pts.vtk", {"w": rng.random(7)})
        back, tris, data = read_vtk_polydata(path)
        assert np.array_equal(back, points)
        assert np.array_equal(tris, triangles)
        assert set(data) == {"w"}

    def test_point_data_round_trip(self, tmp_path):
        mesh = build_icosphere(1)
        values = mesh.vertices[:, 2] ** 2
        path = write_vtk_mesh(mesh, tmp_path / "m.vtk", {"z2": values, "one": np.ones(mesh.n_vertices)})
        _, _, data = read_vtk_polydata(path)
        assert np.array_equal(data["z2"], values)
        assert np.array_equal(data["one"], np.ones(mesh.n_vertices))

    def test_header_layout(self, tmp_path):
        path = write_vtk_mesh(build_icosphere(0), tmp_path / "ico.vtk")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# vtk DataFile")
        assert lines[2] == "ASCII"
        assert lines[3] == "DATASET POLYDATA"
        assert lines[4] == "POINTS 12 double"
        assert "POLYGONS 20 80" in lines

    def test_point_data_length_checked(self, tmp_path):
        with pytest.raises(ExportError):
            write_vtk_polydata(np.zeros((3, 3)), [[0, 1, 2]], tmp_path / "x.vtk", {"bad": np.ones(2)})

    def test_rejects_other_datasets(self, tmp_path):
        path = tmp_path / "grid.vtk"
        path.write_text("# vtk DataFile Version 3.0\nx\nASCII\nDATASET STRUCTURED_POINTS\n")
        with pytest.raises(ExportError):
            read_vtk_polydata(path)
