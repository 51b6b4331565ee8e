"""
Continuous Lagrange spaces of degree k on a piecewise-flat surface.

Nodes sit on the equispaced barycentric lattice of each triangle; the global
numbering is shared with the mesh lattice (vertices, edge nodes, interior
nodes). Vector fields store their components interleaved: flat index
3 * dof + c.
"""
from __future__ import annotations

import logging
from typing import Callable, Optional

import numpy as np

from ..errors import MeshMismatch, UnsupportedDegree
from ..mesh.surface import SurfaceMesh, lattice_indices, lattice_node_map
from .refgeom import ReferenceManifold

logger = logging.getLogger(__name__)

MAX_DEGREE = 8


def _silvester(k: int, lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    R_a(lam) = prod_{m<a} (k lam - m) / (m + 1) and its derivative for a = 0..k.
    Returns arrays of shape (k + 1,) + lam.shape.
    """
    vals = np.ones((k + 1,) + lam.shape)
    ders = np.zeros((k + 1,) + lam.shape)
    for a in range(1, k + 1):
        m = a - 1
        factor = (k * lam - m) / (m + 1)
        ders[a] = ders[a - 1] * factor + vals[a - 1] * k / (m + 1)
        vals[a] = vals[a - 1] * factor
    return vals, ders


class LagrangeSpace:
    def __init__(self, mesh: SurfaceMesh, degree: int):
        self.mesh = mesh
        self.degree = degree
        self.lattice = lattice_indices(degree)
        self.ref_nodes = self.lattice[:, 1:] / degree
        self.dof_map, self.ndof = lattice_node_map(mesh, degree)
        self._tabulated: dict = {}

    def __repr__(self) -> str:
        return f"LagrangeSpace(P{self.degree}, ndof={self.ndof})"

    @property
    def n_local(self) -> int:
        return self.lattice.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        """Physical nodal points on the flat triangles, (ndof, 3)."""
        if "nodes" not in self._tabulated:
            pts = self.mesh.chart_points(self.ref_nodes)
            nodes = np.empty((self.ndof, 3))
            nodes[self.dof_map] = pts
            self._tabulated["nodes"] = nodes
        return self._tabulated["nodes"]

    def tabulate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Shape functions and chart gradients at reference points.
        `points` (..., 2) -> phi (..., nloc), dphi (..., nloc, 2).
        """
        points = np.asarray(points, dtype=float)
        key = (points.shape, points.tobytes())
        hit = self._tabulated.get(key)
        if hit is not None:
            return hit

        k = self.degree
        lam = np.stack((1.0 - points[..., 0] - points[..., 1], points[..., 0], points[..., 1]))
        vals, ders = _silvester(k, lam)  # (k+1, 3, ...)
        a0, a1, a2 = self.lattice.T
        r0, r1, r2 = vals[a0, 0], vals[a1, 1], vals[a2, 2]
        d0, d1, d2 = ders[a0, 0], ders[a1, 1], ders[a2, 2]

        phi = np.moveaxis(r0 * r1 * r2, 0, -1)
        dx = d1 * r0 * r2 - d0 * r1 * r2
        dy = d2 * r0 * r1 - d0 * r1 * r2
        dphi = np.stack((np.moveaxis(dx, 0, -1), np.moveaxis(dy, 0, -1)), axis=-1)

        if len(self._tabulated) > 16:
            self._tabulated = {k_: v for k_, v in self._tabulated.items() if k_ == "nodes"}
        self._tabulated[key] = (phi, dphi)
        return phi, dphi


class FeField:
    """Coefficients (ndof, ncomp) of a scalar or vector Lagrange field."""

    def __init__(self, space: LagrangeSpace, coefficients: np.ndarray):
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.ndim == 1:
            coefficients = coefficients[:, None]
        if coefficients.shape[0] != space.ndof:
            raise MeshMismatch(
                f"Coefficient length {coefficients.shape[0]} does not match space dimension {space.ndof}"
            )
        self.space = space
        self.coefficients = coefficients

    def __repr__(self) -> str:
        return f"FeField({self.space!r}, ncomp={self.ncomp})"

    @property
    def ncomp(self) -> int:
        return self.coefficients.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self.coefficients.ravel()

    @classmethod
    def from_flat(cls, space: LagrangeSpace, vector: np.ndarray, ncomp: int = 3) -> "FeField":
        return cls(space, np.asarray(vector, dtype=float).reshape(space.ndof, ncomp))

    @classmethod
    def zeros(cls, space: LagrangeSpace, ncomp: int = 3) -> "FeField":
        return cls(space, np.zeros((space.ndof, ncomp)))

    def copy(self) -> "FeField":
        return FeField(self.space, self.coefficients.copy())

    def _check(self, other: "FeField"):
        if other.space is not self.space:
            raise MeshMismatch("Fields live on different spaces")

    def __add__(self, other: "FeField") -> "FeField":
        self._check(other)
        return FeField(self.space, self.coefficients + other.coefficients)

    def __sub__(self, other: "FeField") -> "FeField":
        self._check(other)
        return FeField(self.space, self.coefficients - other.coefficients)

    def __mul__(self, scalar: float) -> "FeField":
        return FeField(self.space, self.coefficients * scalar)

    __rmul__ = __mul__

    def local(self, elements: Optional[np.ndarray] = None) -> np.ndarray:
        dofs = self.space.dof_map if elements is None else self.space.dof_map[elements]
        return self.coefficients[dofs]

    def evaluate(self, points: np.ndarray, elements: Optional[np.ndarray] = None):
        """
        Values (m, nq, ncomp) and chart gradients (m, nq, ncomp, 2) at reference
        points shared by all selected elements.
        """
        phi, dphi = self.space.tabulate(points)
        coeff = self.local(elements)
        values = np.einsum("qn,mnc->mqc", phi, coeff)
        grads = np.einsum("qni,mnc->mqci", dphi, coeff)
        return values, grads


def build_lagrange_space(mesh: SurfaceMesh, k: int) -> LagrangeSpace:
    if k < 1 or k > MAX_DEGREE:
        raise UnsupportedDegree(f"Lagrange degree {k} not in [1, {MAX_DEGREE}]")
    space = LagrangeSpace(mesh, k)
    logger.debug("P%d space on %d triangles: %d dofs", k, mesh.n_triangles, space.ndof)
    return space


def interpolate(
    space: LagrangeSpace, f: Callable[[np.ndarray], np.ndarray], components: Optional[int] = None
) -> FeField:
    """Nodal interpolant of f evaluated at the nodes of the flat mesh."""
    values = np.asarray(f(space.nodes), dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if components is not None and values.shape[1] != components:
        raise ValueError(f"Expected {components} components, got {values.shape[1]}")
    return FeField(space, values)


def lift(manifold: ReferenceManifold, f: Callable[[np.ndarray], np.ndarray]):
    """f composed with the closest point projection onto `manifold`."""
    return lambda x: f(manifold.closest_point(x))


def eval_with_gradient(field: FeField, element: int, barycentric) -> tuple[np.ndarray, np.ndarray]:
    """Value (ncomp,) and chart gradient (ncomp, 2) at one barycentric point."""
    bary = np.asarray(barycentric, dtype=float)
    point = bary[None, 1:]
    values, grads = field.evaluate(point, np.array([element]))
    return values[0, 0], grads[0, 0]


def rigid_motion_basis(r: FeField) -> list[FeField]:
    """Fields e_i x r and e_i (i = 1, 2, 3), all exactly in the vector space."""
    if r.ncomp != 3:
        raise ValueError("Rigid motions need a 3-component embedding")
    basis = []
    for i in range(3):
        axis = np.zeros(3)
        axis[i] = 1.0
        basis.append(FeField(r.space, np.cross(axis, r.coefficients)))
    for i in range(3):
        const = np.zeros((r.space.ndof, 3))
        const[:, i] = 1.0
        basis.append(FeField(r.space, const))
    return basis


def rigid_motion_matrix(r: FeField) -> np.ndarray:
    """(3 ndof, 6) matrix whose columns are the flattened rigid motion fields."""
    return np.column_stack([b.flat for b in rigid_motion_basis(r)])
