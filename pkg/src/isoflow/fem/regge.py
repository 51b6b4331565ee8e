"""
Regge spaces of symmetric (0,2)-tensors with tangential-tangential continuity.

Degrees of freedom of a P_kg tensor sigma on a triangle K:
  edge e, m = 0..kg:   int_e (t^T sigma t) q_m ds, q_m the Legendre polynomial
                       in normalized arclength along the global edge,
                       orthonormal on [0, 1]
  interior:            int_K sigma : Q dxi, Q running over an orthonormal
                       P_(kg-1) symmetric-tensor basis in chart coordinates

The dual basis is computed once on the reference triangle. On a physical
triangle the chart representation coincides with the reference one, so only
the edge functionals pick up a factor sign / L.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np
from scipy.special import eval_legendre

from ..errors import BoundaryEdge, MeshMismatch, SingularLocalSolve, UnsupportedDegree
from ..mesh.quadrature import gauss_line_rule, quadrature_rule
from ..mesh.surface import EDGE_DIRECTIONS, EDGE_ORIGINS, SurfaceMesh

logger = logging.getLogger(__name__)

MAX_DEGREE = 8
CONDITION_WARNING = 1e10
CONDITION_LIMIT = 1e14

# Symmetric components are stored as (11, 22, 12).
_UNIT_TENSORS = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0 / np.sqrt(2.0)]])


def _exponents(k: int) -> np.ndarray:
    return np.array([(a, d - a) for d in range(k + 1) for a in range(d, -1, -1)], dtype=np.int64)


def _monomials(k: int, points: np.ndarray) -> np.ndarray:
    exps = _exponents(k)
    return points[..., 0, None] ** exps[:, 0] * points[..., 1, None] ** exps[:, 1]


class OrthonormalPolynomials:
    """L2-orthonormal basis of P_k on the reference triangle, by QR of weighted monomials."""

    def __init__(self, k: int):
        self.degree = k
        rule = quadrature_rule(2 * k)
        vander = _monomials(k, rule.points) * np.sqrt(rule.weights)[:, None]
        _, r = np.linalg.qr(vander)
        self._coeffs = np.linalg.inv(r)

    def __len__(self) -> int:
        return self._coeffs.shape[1]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return _monomials(self.degree, np.asarray(points, dtype=float)) @ self._coeffs


def _tensor(components: np.ndarray) -> np.ndarray:
    """(..., 3) symmetric components -> (..., 2, 2)."""
    out = np.empty(components.shape[:-1] + (2, 2))
    out[..., 0, 0] = components[..., 0]
    out[..., 1, 1] = components[..., 1]
    out[..., 0, 1] = components[..., 2]
    out[..., 1, 0] = components[..., 2]
    return out


def _tt(tensor: np.ndarray, d: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,i,j->...", tensor, d, d)


def scaled_legendre(m: int, tau: np.ndarray) -> np.ndarray:
    return np.sqrt(2 * m + 1) * eval_legendre(m, 2.0 * tau - 1.0)


class ReferenceReggeElement:
    def __init__(self, k: int):
        self.degree = k
        self.scalar = OrthonormalPolynomials(k)
        self.n_edge = k + 1
        self.n_interior = 3 * k * (k + 1) // 2
        self.n_local = 3 * (k + 1) * (k + 2) // 2

        tau, w_tau = gauss_line_rule(k + 2)
        rule = quadrature_rule(2 * k)
        interior_basis = OrthonormalPolynomials(k - 1) if k > 0 else None
        self.interior_basis = interior_basis

        rows = []
        for j in range(3):
            pts = EDGE_ORIGINS[j] + tau[:, None] * EDGE_DIRECTIONS[j]
            prim = self._primal(pts)                      # (nt, nprim, 2, 2)
            tt = _tt(prim, EDGE_DIRECTIONS[j])            # (nt, nprim)
            for m in range(k + 1):
                rows.append(np.einsum("t,t,tp->p", w_tau, scaled_legendre(m, tau), tt))
        if interior_basis is not None:
            prim = self._primal(rule.points)
            q_scalar = interior_basis(rule.points)        # (nq, nQ)
            for a in range(len(interior_basis)):
                for c in range(3):
                    # Frobenius product with the unit tensor c
                    frob = np.einsum("qpij,ij->qp", prim, _tensor(_UNIT_TENSORS[c]))
                    rows.append(np.einsum("q,q,qp->p", rule.weights, q_scalar[:, a], frob))
        dofs = np.array(rows)

        self.condition = float(np.linalg.cond(dofs))
        if not np.isfinite(self.condition) or self.condition > CONDITION_LIMIT:
            raise SingularLocalSolve(f"Regge P{k} local DOF matrix is singular (cond={self.condition:.3e})")
        if self.condition > CONDITION_WARNING:
            logger.warning("Regge P%d local DOF matrix is ill conditioned: cond=%.3e", k, self.condition)
        else:
            logger.debug("Regge P%d local DOF matrix cond=%.3e", k, self.condition)

        # dual basis: phi_i = sum_p psi_p C[p, i]
        self.dual = np.linalg.inv(dofs)
        self.dof_matrix = dofs
        self.edge_tau = tau
        self.edge_weights = w_tau

    def _primal_components(self, points: np.ndarray) -> np.ndarray:
        """(..., nprim, 3) components of psi_p = P_a (x) E_b, p = 3 a + b."""
        scal = self.scalar(points)
        comps = scal[..., :, None, None] * _UNIT_TENSORS
        return comps.reshape(scal.shape[:-1] + (-1, 3))

    def _primal(self, points: np.ndarray) -> np.ndarray:
        return _tensor(self._primal_components(points))

    def tabulate(self, points: np.ndarray) -> np.ndarray:
        """Components (..., nloc, 3) of the dual basis at reference points."""
        prim = self._primal_components(points)
        return np.einsum("...pc,pi->...ic", prim, self.dual)


_REFERENCE_CACHE: dict[int, ReferenceReggeElement] = {}


def reference_element(k: int) -> ReferenceReggeElement:
    if k not in _REFERENCE_CACHE:
        _REFERENCE_CACHE[k] = ReferenceReggeElement(k)
    return _REFERENCE_CACHE[k]


class ReggeSpace:
    def __init__(self, mesh: SurfaceMesh, degree: int):
        self.mesh = mesh
        self.degree = degree
        self.element = reference_element(degree)
        ne, ni = self.element.n_edge, self.element.n_interior
        E, F = mesh.n_edges, mesh.n_triangles
        self.ndof = E * ne + F * ni

        m = np.arange(ne)
        edge_dofs = (mesh.tri_edges[:, :, None] * ne + m).reshape(F, 3 * ne)
        interior = E * ne + np.arange(F)[:, None] * ni + np.arange(ni)
        self.dof_map = np.hstack((edge_dofs, interior))

        # sigma_hat = sum_i (c_i / s_i) phi_hat_i with s_i = sign^m / L on edges
        lengths = mesh.edge_lengths[mesh.tri_edges]                     # (F, 3)
        flip = mesh.tri_edge_sign < 0
        parity = np.where(flip[:, :, None] & (m % 2 == 1), -1.0, 1.0)  # (F, 3, ne)
        edge_scale = (lengths[:, :, None] * parity).reshape(F, 3 * ne)
        self.scale = np.hstack((edge_scale, np.ones((F, ni))))
        self.edge_parity = parity

    def __repr__(self) -> str:
        return f"ReggeSpace(P{self.degree}, ndof={self.ndof})"


class DiscreteMetric:
    """Coefficient vector in a Regge space. `version` bumps on every update."""

    def __init__(self, space: ReggeSpace, coefficients: Optional[np.ndarray] = None):
        self.space = space
        self.mesh = space.mesh
        self.coefficients = np.zeros(space.ndof) if coefficients is None else np.asarray(coefficients, float)
        if self.coefficients.shape != (space.ndof,):
            raise MeshMismatch(f"Expected {space.ndof} Regge coefficients, got {self.coefficients.shape}")
        self.version = 0

    def update(self, coefficients: np.ndarray):
        self.coefficients = np.asarray(coefficients, dtype=float)
        self.version += 1

    def local(self, elements: np.ndarray) -> np.ndarray:
        sp = self.space
        return self.coefficients[sp.dof_map[elements]] * sp.scale[elements]

    def evaluate(self, elements: Optional[np.ndarray], points: np.ndarray) -> np.ndarray:
        """
        Chart tensors (m, nq, 2, 2). `points` is (nq, 2) shared by all elements
        or (m, nq, 2) per element.
        """
        if elements is None:
            elements = np.arange(self.mesh.n_triangles)
        elements = np.asarray(elements)
        coeff = self.local(elements)
        basis = self.space.element.tabulate(np.asarray(points, dtype=float))
        if basis.ndim == 3:
            comps = np.einsum("qic,mi->mqc", basis, coeff)
        else:
            comps = np.einsum("mqic,mi->mqc", basis, coeff)
        return _tensor(comps)

    def __add__(self, other: "DiscreteMetric") -> "DiscreteMetric":
        if other.space is not self.space:
            raise MeshMismatch("Metrics live on different Regge spaces")
        return DiscreteMetric(self.space, self.coefficients + other.coefficients)

    def __mul__(self, scalar: float) -> "DiscreteMetric":
        return DiscreteMetric(self.space, self.coefficients * scalar)

    __rmul__ = __mul__


def build_regge_space(mesh: SurfaceMesh, k_g: int) -> ReggeSpace:
    if k_g < 0 or k_g > MAX_DEGREE:
        raise UnsupportedDegree(f"Regge degree {k_g} not in [0, {MAX_DEGREE}]")
    space = ReggeSpace(mesh, k_g)
    logger.debug("Regge P%d space on %d triangles: %d dofs", k_g, mesh.n_triangles, space.ndof)
    return space


def _edge_points(tau: np.ndarray) -> np.ndarray:
    """(3 * nt, 2) reference points along the three local edges."""
    return np.vstack([EDGE_ORIGINS[j] + tau[:, None] * EDGE_DIRECTIONS[j] for j in range(3)])


def regge_interpolate(space: ReggeSpace, sigma, t: Optional[float] = None) -> DiscreteMetric:
    """
    Canonical interpolant of a chart tensor field. `sigma` provides
    evaluate(elements, points[, t]); edge moments from the two incident
    triangles are averaged.
    """
    mesh = space.mesh
    if getattr(sigma, "mesh", mesh) is not mesh:
        raise MeshMismatch("Tensor field and Regge space live on different meshes")
    k = space.degree
    ref = space.element
    F, E = mesh.n_triangles, mesh.n_edges

    def evaluate(points):
        if t is None:
            return sigma.evaluate(None, points)
        return sigma.evaluate(None, points, t)

    tau, w_tau = gauss_line_rule(k + 4)
    nt = len(tau)
    values = evaluate(_edge_points(tau)).reshape(F, 3, nt, 2, 2)
    tt = np.einsum("fjtab,ja,jb->fjt", values, EDGE_DIRECTIONS, EDGE_DIRECTIONS)
    legendre = np.array([scaled_legendre(m, tau) for m in range(k + 1)])     # (ne, nt)
    ref_edge = np.einsum("fjt,t,mt->fjm", tt, w_tau, legendre)
    lengths = mesh.edge_lengths[mesh.tri_edges]
    phys_edge = ref_edge * space.edge_parity / lengths[:, :, None]

    coeffs = np.zeros(space.ndof)
    edge_sum = np.zeros((E, k + 1))
    np.add.at(edge_sum, mesh.tri_edges, phys_edge)
    coeffs[: E * (k + 1)] = (edge_sum / 2.0).ravel()

    if ref.n_interior:
        rule = quadrature_rule(2 * k + 3)
        values = evaluate(rule.points)                                     # (F, nq, 2, 2)
        q_scalar = ref.interior_basis(rule.points)                          # (nq, nQ)
        comps = np.stack((values[..., 0, 0], values[..., 1, 1], values[..., 0, 1]), axis=-1)
        # Frobenius weights for the (11, 22, 12) components
        frob = comps * np.array([1.0, 1.0, 2.0]) * _UNIT_TENSORS.diagonal()
        interior = np.einsum("q,qa,fqc->fac", rule.weights, q_scalar, frob).reshape(F, -1)
        coeffs[E * (k + 1):] = interior.ravel()

    return DiscreteMetric(space, coeffs)


def eval_tensor(metric: DiscreteMetric, element: int, barycentric) -> np.ndarray:
    bary = np.asarray(barycentric, dtype=float)
    return metric.evaluate(np.array([element]), bary[None, 1:])[0, 0]


def tt_jump(field, edge: int, count: int, flip: bool = False) -> np.ndarray:
    """
    |t^T sigma t| mismatch between the two triangles of `edge` at `count`
    Gauss points, t the unit tangent of the global edge (reversed when `flip`).
    `field` is anything with evaluate(elements, points) and a `mesh`.
    """
    mesh = field.mesh
    left, right = mesh.edge_triangles[edge]
    if left < 0 or right < 0:
        raise BoundaryEdge(f"Edge {edge} has a single incident triangle")
    tau, _ = gauss_line_rule(count)
    if flip:
        tau = tau[::-1]

    sides = []
    for tri in (left, right):
        j = int(np.flatnonzero(mesh.tri_edges[tri] == edge)[0])
        local_tau = tau if mesh.tri_edge_sign[tri, j] > 0 else 1.0 - tau
        pts = EDGE_ORIGINS[j] + local_tau[:, None] * EDGE_DIRECTIONS[j]
        d = EDGE_DIRECTIONS[j] * (-1.0 if flip else 1.0)
        values = field.evaluate(np.array([tri]), pts)[0]
        sides.append(_tt(values, d) / mesh.edge_lengths[edge] ** 2)
    return np.abs(sides[0] - sides[1])
