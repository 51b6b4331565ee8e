"""
Tests for SurfaceMesh construction, sphere meshes and projection onto
reference manifolds.
"""
import numpy as np
import pytest

from isoflow.errors import MeshTopologyError
from isoflow.fem.refgeom import Ellipsoid, Revolution, Sphere, trig_profile
from isoflow.mesh.surface import (
    SurfaceMesh,
    build_geodesic_sphere,
    build_icosphere,
    frequency_for_target_h,
    lattice_indices,
    lattice_node_map,
    lattice_triangles,
    mesh_on_manifold,
    mesh_size,
    project_to_manifold,
)


class TestIcosphere:
    """Counts and geometry of the refined icosahedron."""

    @pytest.mark.parametrize("level, counts", [
        (0, (12, 30, 20)),
        (1, (42, 120, 80)),
        (2, (162, 480, 320)),
    ])
    def test_counts(self, level, counts):
        mesh = build_icosphere(level)
        assert (mesh.n_vertices, mesh.n_edges, mesh.n_triangles) == counts

    def test_coarse_mesh_size(self):
        h0 = 4.0 / np.sqrt(10.0 + 2.0 * np.sqrt(5.0))
        assert mesh_size(build_icosphere(0)) == pytest.approx(h0, rel=1e-12)

    def test_vertices_on_unit_sphere(self):
        mesh = build_icosphere(3)
        np.testing.assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0, atol=1e-14)

    def test_outward_orientation(self):
        assert build_icosphere(2).signed_volume() > 0

    def test_euler_characteristic(self):
        mesh = build_icosphere(2)
        assert mesh.n_vertices - mesh.n_edges + mesh.n_triangles == 2

    def test_level_out_of_range(self):
        with pytest.raises(ValueError):
            build_icosphere(11)


class TestConnectivity:
    """Edge bookkeeping shared by every element routine."""

    def test_edges_ascending(self):
        mesh = build_icosphere(1)
        assert np.all(mesh.edges[:, 0] < mesh.edges[:, 1])

    def test_local_edges_match_global(self):
        mesh = build_icosphere(1)
        for f in range(mesh.n_triangles):
            for j in range(3):
                a, b = mesh.triangles[f, j], mesh.triangles[f, (j + 1) % 3]
                e = mesh.tri_edges[f, j]
                assert sorted((a, b)) == list(mesh.edges[e])
                assert mesh.tri_edge_sign[f, j] == (1 if a < b else -1)

    def test_edge_triangles_traverse_both_ways(self):
        mesh = build_icosphere(1)
        for e in range(mesh.n_edges):
            left, right = mesh.edge_triangles[e]
            j_left = list(mesh.tri_edges[left]).index(e)
            j_right = list(mesh.tri_edges[right]).index(e)
            assert mesh.tri_edge_sign[left, j_left] == 1
            assert mesh.tri_edge_sign[right, j_right] == -1

    def test_open_surface_rejected(self):
        mesh = build_icosphere(0)
        with pytest.raises(MeshTopologyError):
            SurfaceMesh.from_triangles(mesh.vertices, mesh.triangles[1:])

    def test_inconsistent_orientation_rejected(self):
        mesh = build_icosphere(0)
        faces = mesh.triangles.copy()
        faces[0] = faces[0, [0, 2, 1]]
        with pytest.raises(MeshTopologyError):
            SurfaceMesh.from_triangles(mesh.vertices, faces)

    def test_bad_shapes_rejected(self):
        with pytest.raises(MeshTopologyError):
            SurfaceMesh.from_triangles(np.zeros((4, 2)), [[0, 1, 2]])
        with pytest.raises(MeshTopologyError):
            SurfaceMesh.from_triangles(np.zeros((3, 3)), [[0, 1, 5]])

    def test_chart_points_hit_vertices(self):
        mesh = build_icosphere(0)
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        x = mesh.chart_points(corners)
        np.testing.assert_allclose(x, mesh.vertices[mesh.triangles], atol=1e-15)


class TestLattice:
    """Barycentric lattices used by Lagrange nodes and VTK subdivision."""

    def test_lattice_sizes(self):
        assert len(lattice_indices(4)) == 15
        assert len(lattice_triangles(4)) == 16
        assert np.all(lattice_indices(4).sum(axis=1) == 4)

    def test_global_node_count(self):
        mesh = build_icosphere(0)
        node_map, total = lattice_node_map(mesh, 5)
        assert total == 12 + 30 * 4 + 20 * 6
        assert len(np.unique(node_map)) == total

    def test_shared_edge_nodes_coincide(self):
        mesh = build_icosphere(0)
        n = 3
        node_map, total = lattice_node_map(mesh, n)
        bary = lattice_indices(n) / n
        points = np.einsum("qj,fjc->fqc", bary, mesh.vertices[mesh.triangles])
        first = {}
        for f in range(mesh.n_triangles):
            for q, node in enumerate(node_map[f]):
                if node in first:
                    np.testing.assert_allclose(points[f, q], first[node], atol=1e-14)
                else:
                    first[node] = points[f, q]
        assert len(first) == total


class TestGeodesicSphere:
    """Class-I geodesic spheres."""

    @pytest.mark.parametrize("frequency", [1, 3, 5])
    def test_counts(self, frequency):
        mesh = build_geodesic_sphere(frequency)
        assert mesh.n_triangles == 20 * frequency**2
        assert mesh.n_vertices == 10 * frequency**2 + 2

    def test_frequency_two_matches_level_one(self):
        assert build_geodesic_sphere(2).n_vertices == build_icosphere(1).n_vertices

    def test_target_h_selection(self):
        sphere = Sphere(1.0)
        n = frequency_for_target_h(sphere, 0.5)
        h = mesh_size(mesh_on_manifold(build_geodesic_sphere(n), sphere))
        for other in (n - 1, n + 1):
            if other >= 1:
                h_other = mesh_size(mesh_on_manifold(build_geodesic_sphere(other), sphere))
                assert abs(h - 0.5) <= abs(h_other - 0.5)


class TestProjection:
    """Vertices end up on the reference manifold."""

    def test_sphere_projection(self):
        q = Sphere(1.0).closest_point(np.array([[2.0, 0.0, 0.0]]))
        np.testing.assert_allclose(q, [[1.0, 0.0, 0.0]], atol=1e-15)

    def test_ellipsoid_mesh_on_surface(self):
        ellipsoid = Ellipsoid((0.5, 0.5, 1.0))
        mesh = mesh_on_manifold(build_icosphere(2), ellipsoid)
        level = np.sum((mesh.vertices / ellipsoid.axes) ** 2, axis=1)
        np.testing.assert_allclose(level, 1.0, atol=1e-12)

    def test_projection_keeps_connectivity(self):
        base = build_icosphere(1)
        moved = project_to_manifold(base, Ellipsoid((0.5, 0.5, 1.0)))
        assert moved.triangles is base.triangles
        assert moved.signed_volume() > 0

    def test_revolution_mesh_on_surface(self):
        manifold = Revolution(trig_profile(0.7, 0.1, 0.5))
        mesh = mesh_on_manifold(build_icosphere(2), manifold)
        np.testing.assert_allclose(manifold.closest_point(mesh.vertices), mesh.vertices, atol=1e-12)
