"""
Piecewise-flat triangulations of closed genus-0 surfaces.

Local conventions shared by every element-level routine:
  - reference triangle (0,0)-(1,0)-(0,1); reference coordinates are the chart
    coordinates of the affine map X = P0 + xi1 (P1 - P0) + xi2 (P2 - P0)
  - local edge j runs from local vertex j to local vertex (j + 1) % 3
  - global edges are stored with ascending vertex indices
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache
from typing import TYPE_CHECKING, Optional

import numpy as np

from ..errors import MeshTopologyError

if TYPE_CHECKING:
    from ..fem.refgeom import ReferenceManifold

logger = logging.getLogger(__name__)

MAX_LEVEL = 10

# Reference directions of the local edges in chart coordinates.
EDGE_DIRECTIONS = np.array([[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0]])
EDGE_ORIGINS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray        # (V, 3)
    triangles: np.ndarray       # (F, 3)
    edges: np.ndarray           # (E, 2), ascending
    edge_triangles: np.ndarray  # (E, 2): [triangle traversing a->b, triangle traversing b->a]
    tri_edges: np.ndarray       # (F, 3) global edge of local edge j
    tri_edge_sign: np.ndarray   # (F, 3) +1 when local edge j runs in the global direction

    @classmethod
    def from_triangles(cls, vertices, triangles) -> "SurfaceMesh":
        """Build connectivity and check the closed/oriented/genus-0 invariants."""
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshTopologyError(f"Vertices must have shape (V, 3), got {vertices.shape}")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise MeshTopologyError(f"Triangles must have shape (F, 3), got {triangles.shape}")
        if len(triangles) == 0:
            raise MeshTopologyError("Mesh has no triangles")
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise MeshTopologyError("Triangle references a missing vertex")

        tail = triangles.ravel()
        head = np.roll(triangles, -1, axis=1).ravel()
        if np.any(tail == head):
            raise MeshTopologyError("Degenerate triangle with repeated vertex")

        lo = np.minimum(tail, head)
        hi = np.maximum(tail, head)
        edges, inverse, counts = np.unique(
            np.column_stack((lo, hi)), axis=0, return_inverse=True, return_counts=True
        )
        inverse = inverse.ravel()
        if np.any(counts != 2):
            raise MeshTopologyError(
                f"{int(np.sum(counts != 2))} edges do not have exactly two incident triangles"
            )

        forward = tail < head
        fwd_hits = np.bincount(inverse[forward], minlength=len(edges))
        if np.any(fwd_hits != 1):
            raise MeshTopologyError("Inconsistent triangle orientation")

        n_faces = len(triangles)
        face_of = np.repeat(np.arange(n_faces), 3)
        edge_triangles = np.empty((len(edges), 2), dtype=np.int64)
        edge_triangles[inverse[forward], 0] = face_of[forward]
        edge_triangles[inverse[~forward], 1] = face_of[~forward]

        euler = len(vertices) - len(edges) + n_faces
        if euler != 2:
            raise MeshTopologyError(f"Euler characteristic {euler} != 2")

        tri_edges = inverse.reshape(n_faces, 3)
        tri_edge_sign = np.where(forward, 1, -1).reshape(n_faces, 3)

        for arr in (vertices, triangles, edges, edge_triangles, tri_edges, tri_edge_sign):
            arr.setflags(write=False)
        return cls(vertices, triangles, edges, edge_triangles, tri_edges, tri_edge_sign)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def chart_origin(self) -> np.ndarray:
        return self.vertices[self.triangles[:, 0]]

    @cached_property
    def chart_axes(self) -> np.ndarray:
        """(F, 3, 2) matrix [P1 - P0, P2 - P0] of each affine chart."""
        p = self.vertices[self.triangles]
        return np.stack((p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=-1)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]], axis=1)

    def chart_points(self, points: np.ndarray, elements: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Map reference points to R^3.
        `points` is (nq, 2) shared by all elements or (m, nq, 2) per element.
        """
        if elements is None:
            elements = np.arange(self.n_triangles)
        origin = self.chart_origin[elements]
        axes = self.chart_axes[elements]
        if points.ndim == 2:
            return origin[:, None, :] + np.einsum("mci,qi->mqc", axes, points)
        return origin[:, None, :] + np.einsum("mci,mqi->mqc", axes, points)

    def signed_volume(self) -> float:
        p = self.vertices[self.triangles]
        return float(np.sum(np.einsum("fi,fi->f", p[:, 0], np.cross(p[:, 1], p[:, 2]))) / 6.0)

    def summary(self) -> dict:
        return {
            "vertices": self.n_vertices,
            "edges": self.n_edges,
            "triangles": self.n_triangles,
            "h": mesh_size(self),
        }


def mesh_size(mesh: SurfaceMesh) -> float:
    """Maximum Euclidean edge length."""
    return float(np.max(mesh.edge_lengths))


# --- barycentric lattices -------------------------------------------------

@lru_cache(maxsize=None)
def lattice_indices(n: int) -> np.ndarray:
    """
    Integer barycentric multi-indices (alpha0, alpha1, alpha2) summing to n.
    Order: 3 vertices, then n-1 nodes per local edge starting at its first
    vertex, then interior nodes.
    """
    if n < 1:
        raise ValueError(f"Lattice frequency must be >= 1, got {n}")
    rows = [[n, 0, 0], [0, n, 0], [0, 0, n]]
    for j in range(3):
        nxt = (j + 1) % 3
        for m in range(1, n):
            alpha = [0, 0, 0]
            alpha[j] = n - m
            alpha[nxt] = m
            rows.append(alpha)
    for b in range(1, n - 1):
        for a in range(1, n - b):
            rows.append([n - a - b, a, b])
    out = np.array(rows, dtype=np.int64)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def lattice_triangles(n: int) -> np.ndarray:
    """The n^2 sub-triangles of the lattice, as local lattice indices, counter-clockwise."""
    alpha = lattice_indices(n)
    lookup = {(int(a1), int(a2)): i for i, (_, a1, a2) in enumerate(alpha)}
    tris = []
    for j in range(n):
        for i in range(n - j):
            tris.append((lookup[i, j], lookup[i + 1, j], lookup[i, j + 1]))
            if i + j < n - 1:
                tris.append((lookup[i + 1, j], lookup[i + 1, j + 1], lookup[i, j + 1]))
    out = np.array(tris, dtype=np.int64)
    out.setflags(write=False)
    return out


def lattice_node_map(mesh: SurfaceMesh, n: int) -> tuple[np.ndarray, int]:
    """
    Global numbering of the frequency-n lattice nodes of every triangle.
    Vertex nodes keep the vertex id, edge nodes follow in global edge order
    (ascending along the edge), interior nodes come last.
    Returns the (F, nloc) map and the number of global nodes.
    """
    V, E, F = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
    n_edge = n - 1
    n_int = (n - 1) * (n - 2) // 2
    nloc = (n + 1) * (n + 2) // 2
    node_map = np.empty((F, nloc), dtype=np.int64)
    node_map[:, :3] = mesh.triangles

    if n_edge > 0:
        m = np.arange(1, n)
        for j in range(3):
            e = mesh.tri_edges[:, j][:, None]
            fwd = (mesh.tri_edge_sign[:, j] > 0)[:, None]
            slot = np.where(fwd, m - 1, n - 1 - m)
            node_map[:, 3 + j * n_edge: 3 + (j + 1) * n_edge] = V + e * n_edge + slot

    if n_int > 0:
        start = V + E * n_edge
        node_map[:, 3 + 3 * n_edge:] = start + np.arange(F)[:, None] * n_int + np.arange(n_int)

    total = V + E * n_edge + F * n_int
    node_map.setflags(write=False)
    return node_map, total


# --- constructions --------------------------------------------------------

def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    """Unit icosahedron with vertices at both poles."""
    ring = 2.0 / np.sqrt(5.0)
    height = 1.0 / np.sqrt(5.0)
    upper = np.arange(5) * 2.0 * np.pi / 5.0
    lower = upper + np.pi / 5.0
    verts = np.vstack((
        [0.0, 0.0, 1.0],
        np.column_stack((ring * np.cos(upper), ring * np.sin(upper), np.full(5, height))),
        np.column_stack((ring * np.cos(lower), ring * np.sin(lower), np.full(5, -height))),
        [0.0, 0.0, -1.0],
    ))
    faces = np.array([
        (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 1),
        (11, 6, 7), (11, 7, 8), (11, 8, 9), (11, 9, 10), (11, 10, 6),
        (1, 2, 6), (2, 3, 7), (3, 4, 8), (4, 5, 9), (5, 1, 10),
        (6, 7, 2), (7, 8, 3), (8, 9, 4), (9, 10, 5), (10, 6, 1),
    ])
    return verts, _orient_outward(verts, faces)


def _orient_outward(verts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p = verts[faces]
    normal = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    inward = np.einsum("fi,fi->f", normal, p.mean(axis=1)) < 0
    faces = faces.copy()
    faces[inward] = faces[inward][:, [0, 2, 1]]
    return faces


def _normalize(points: np.ndarray) -> np.ndarray:
    return points / np.linalg.norm(points, axis=1, keepdims=True)


def refine(mesh: SurfaceMesh, manifold: Optional["ReferenceManifold"] = None) -> SurfaceMesh:
    """
    Split every triangle into four at the edge midpoints.
    New vertices are projected onto `manifold` when one is given.
    """
    V = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    if manifold is not None:
        mid = manifold.closest_point(mid)
    vertices = np.vstack((mesh.vertices, mid))

    a, b, c = mesh.triangles.T
    m_ab, m_bc, m_ca = (V + mesh.tri_edges[:, j] for j in range(3))
    triangles = np.vstack((
        np.column_stack((a, m_ab, m_ca)),
        np.column_stack((m_ab, b, m_bc)),
        np.column_stack((m_ca, m_bc, c)),
        np.column_stack((m_ab, m_bc, m_ca)),
    ))
    return SurfaceMesh.from_triangles(vertices, triangles)


class _UnitSphere:
    @staticmethod
    def closest_point(p: np.ndarray) -> np.ndarray:
        return _normalize(p)


def build_icosphere(level: int) -> SurfaceMesh:
    """Icosahedron refined `level` times by midpoint splitting, on the unit sphere."""
    if level < 0 or level > MAX_LEVEL:
        raise ValueError(f"Icosphere level {level} not in [0, {MAX_LEVEL}]")
    verts, faces = _icosahedron()
    mesh = SurfaceMesh.from_triangles(verts, faces)
    for _ in range(level):
        mesh = refine(mesh, _UnitSphere)
    logger.debug("icosphere level %d: %d triangles, h=%.4f", level, mesh.n_triangles, mesh_size(mesh))
    return mesh


def build_geodesic_sphere(frequency: int) -> SurfaceMesh:
    """
    Class-I geodesic sphere: each icosahedron face carries a frequency-n
    lattice, 20 n^2 triangles in total, all vertices on the unit sphere.
    Frequency 2^L has the combinatorics of icosphere level L.
    """
    if frequency < 1:
        raise ValueError(f"Geodesic frequency must be >= 1, got {frequency}")
    verts, faces = _icosahedron()
    ico = SurfaceMesh.from_triangles(verts, faces)
    node_map, total = lattice_node_map(ico, frequency)

    bary = lattice_indices(frequency) / frequency
    local = np.einsum("qj,fjc->fqc", bary, ico.vertices[ico.triangles])
    points = np.empty((total, 3))
    points[node_map] = local

    sub = lattice_triangles(frequency)
    triangles = node_map[:, sub].reshape(-1, 3)
    return SurfaceMesh.from_triangles(_normalize(points), triangles)


def project_to_manifold(mesh: SurfaceMesh, manifold: "ReferenceManifold") -> SurfaceMesh:
    """Replace every vertex by its closest point on `manifold`; connectivity is kept."""
    projected = manifold.closest_point(mesh.vertices)
    projected.setflags(write=False)
    return replace(mesh, vertices=projected)


def mesh_on_manifold(sphere_mesh: SurfaceMesh, manifold: "ReferenceManifold") -> SurfaceMesh:
    """Carry a unit-sphere mesh onto `manifold` through its sphere parametrization, then project."""
    seeded = replace(sphere_mesh, vertices=manifold.from_sphere(sphere_mesh.vertices))
    return project_to_manifold(seeded, manifold)


def frequency_for_target_h(
    manifold: "ReferenceManifold", target_h: float, max_frequency: int = 40
) -> int:
    """Geodesic frequency whose mesh on `manifold` has mesh size closest to `target_h`."""
    best, best_gap = 1, np.inf
    for n in range(1, max_frequency + 1):
        h = mesh_size(mesh_on_manifold(build_geodesic_sphere(n), manifold))
        gap = abs(h - target_h)
        if gap < best_gap:
            best, best_gap = n, gap
        if h < target_h:
            break
    return best
