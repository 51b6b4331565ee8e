"""
Velocity saddle point system

    2 (dr . dv, dr . dq) + (lambda, q) = (g_dot, dr . dq)   for all q
                                (v, mu) = 0                  for all mu in RM[r]

with the reference embedding r fixed, plus the rigid motion projection and
the discrete Korn constant.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import DegenerateReference, GramSingular, MeshMismatch, SingularSystem
from ..fem.forms import MetricContext
from ..fem.lagrange import FeField, LagrangeSpace, rigid_motion_matrix

logger = logging.getLogger(__name__)

CHUNK = 256
RANK_TOL = 1e-12
GRAM_COND_LIMIT = 1e12
GRAM_COND_WARN = 1e8


@dataclass
class SaddleSystem:
    A: sp.csr_matrix        # (n, n)
    B: np.ndarray           # (6, n)
    f: np.ndarray           # (n,)
    rigid: np.ndarray       # (n, 6) rigid motions of r_ref
    mass: sp.csr_matrix     # scalar mass matrix
    r_ref: FeField
    time: Optional[float] = None

    @property
    def size(self) -> int:
        return self.A.shape[0]


@dataclass
class VelocitySolution:
    v: FeField
    lam: np.ndarray
    residual: float
    constraint_residual: float
    lambda_relative: float

    @property
    def lambda_norm(self) -> float:
        return float(np.linalg.norm(self.lam))


def _global_indices(space: LagrangeSpace, elements: np.ndarray) -> np.ndarray:
    dofs = space.dof_map[elements]
    return (3 * dofs[:, :, None] + np.arange(3)).reshape(len(elements), -1)


def _d_basis(R: np.ndarray, dphi: np.ndarray) -> np.ndarray:
    """
    D_r of every vector basis function, (m, nq, nloc, 3, 2, 2):
    D_{nc,ij} = (R_ci dphi_nj + R_cj dphi_ni) / 2.
    """
    half = 0.5 * np.einsum("mqci,qnj->mqncij", R, dphi)
    return half + np.swapaxes(half, -1, -2)


def assemble_mass(space: LagrangeSpace, ctx: MetricContext) -> sp.csr_matrix:
    """Scalar mass matrix under the reference volume form."""
    if space.mesh is not ctx.mesh:
        raise MeshMismatch("Space and metric context live on different meshes")
    phi, _ = space.tabulate(ctx.rule.points)
    local = np.einsum("fq,qa,qb->fab", ctx.dv, phi, phi)
    dofs = space.dof_map
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(space.ndof, space.ndof)).tocsr()


def vector_mass(mass: sp.spmatrix) -> sp.csr_matrix:
    return sp.kron(mass, sp.identity(3), format="csr")


def assemble_saddle(
    space: LagrangeSpace,
    r_ref: FeField,
    g_dot,
    ctx: MetricContext,
    time_value: Optional[float] = None,
) -> SaddleSystem:
    """
    Assemble A, B and f for the reference embedding `r_ref`.
    `g_dot` is a chart tensor field with evaluate(elements, points), an array
    of shape (F, nq, 2, 2) at the context quadrature points, or None for zero.
    """
    if r_ref.space is not space:
        raise MeshMismatch("Reference embedding does not live on the velocity space")
    ctx.check_field(r_ref)

    started = time.perf_counter()
    F = space.mesh.n_triangles
    n = 3 * space.ndof
    _, dphi = space.tabulate(ctx.rule.points)
    _, R = r_ref.evaluate(ctx.rule.points)
    gdot = None if g_dot is None else ctx.tensor_at_quadrature(g_dot)

    gram = np.einsum("fqci,fqcj->fqij", R, R)
    det = gram[..., 0, 0] * gram[..., 1, 1] - gram[..., 0, 1] ** 2
    scale = max(float(np.max(np.abs(det))), np.finfo(float).tiny)
    if np.any(det <= RANK_TOL * scale):
        raise DegenerateReference(
            f"Reference embedding is rank deficient at {int(np.sum(det <= RANK_TOL * scale))} quadrature points"
        )

    dv, ginv = ctx.dv, ctx.ginv
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for start in range(0, F, CHUNK):
        el = np.arange(start, min(start + CHUNK, F))
        D = _d_basis(R[el], dphi)
        Z = np.einsum("mqik,mqnckl,mqlj->mqncij", ginv[el], D, ginv[el], optimize=True)
        local = 2.0 * np.einsum("mq,mqncij,mqpdji->mncpd", dv[el], Z, D, optimize=True)
        m, nloc = local.shape[:2]
        local = local.reshape(m, 3 * nloc, 3 * nloc)
        idx = _global_indices(space, el)
        rows.append(np.repeat(idx, 3 * nloc, axis=1).ravel())
        cols.append(np.tile(idx, (1, 3 * nloc)).ravel())
        vals.append(local.ravel())
        if gdot is not None:
            G = np.einsum("mqik,mqkl,mqlj->mqij", ginv[el], gdot[el], ginv[el])
            f_loc = np.einsum("mq,mqij,mqncji->mnc", dv[el], G, D, optimize=True)
            np.add.at(rhs, idx.ravel(), f_loc.ravel())

    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()

    mass = assemble_mass(space, ctx)
    rigid = rigid_motion_matrix(r_ref)
    B = np.asarray((vector_mass(mass) @ rigid).T)

    logger.debug(
        "assembled saddle system: n=%d nnz=%d in %.1f ms", n, A.nnz, 1e3 * (time.perf_counter() - started)
    )
    return SaddleSystem(A=A, B=B, f=rhs, rigid=rigid, mass=mass, r_ref=r_ref, time=time_value)


def _bordered(A: sp.spmatrix, B: np.ndarray):
    K = sp.bmat([[A, sp.csr_matrix(B).T], [sp.csr_matrix(B), None]], format="csc")
    try:
        return splu(K)
    except RuntimeError as exc:
        raise SingularSystem(f"Bordered system is singular: {exc}") from exc


def solve_saddle(system: SaddleSystem) -> VelocitySolution:
    n = system.size
    lu = _bordered(system.A, system.B)
    sol = lu.solve(np.concatenate((system.f, np.zeros(6))))
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("Bordered solve produced non-finite values")
    v, lam = sol[:n], sol[n:]

    Av = system.A @ v
    Btl = system.B.T @ lam
    residual = float(np.linalg.norm(Av + Btl - system.f))
    constraint = float(np.linalg.norm(system.B @ v))
    f_norm = float(np.linalg.norm(system.f))
    lam_rel = float(np.linalg.norm(Btl) / f_norm) if f_norm > 0 else float(np.linalg.norm(Btl))
    field = FeField.from_flat(system.r_ref.space, v, 3)
    return VelocitySolution(
        v=field, lam=lam, residual=residual, constraint_residual=constraint, lambda_relative=lam_rel
    )


def _rigid_gram(r_ref: FeField, ctx: MetricContext, mass: Optional[sp.spmatrix] = None):
    if mass is None:
        mass = assemble_mass(r_ref.space, ctx)
    M3 = vector_mass(mass)
    U = rigid_motion_matrix(r_ref)
    MU = np.asarray(M3 @ U)
    gram = U.T @ MU
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > GRAM_COND_LIMIT:
        raise GramSingular(f"Rigid motion Gram matrix is singular (cond={cond:.3e})")
    if cond > GRAM_COND_WARN:
        logger.warning("rigid motion Gram matrix is ill conditioned: cond=%.3e", cond)
    return U, MU, gram


def project_rm(v: FeField, r_ref: FeField, ctx: MetricContext) -> FeField:
    """L2(M_h)-orthogonal projection onto RM[r_ref]."""
    if v.space is not r_ref.space:
        raise MeshMismatch("Field and reference embedding live on different spaces")
    U, MU, gram = _rigid_gram(r_ref, ctx)
    coeff = np.linalg.solve(gram, MU.T @ v.flat)
    return FeField.from_flat(v.space, U @ coeff, 3)


def korn_constant(
    space: LagrangeSpace,
    r_ref: FeField,
    ctx: MetricContext,
    block: int = 8,
    maxiter: int = 200,
    tol: float = 1e-8,
    seed: int = 0,
) -> float:
    """
    min ||dr . dv|| / ||v|| over v L2-orthogonal to RM[r_ref], i.e. the square
    root of the smallest eigenvalue of (A / 2, M) on {Bv = 0}. Block inverse
    iteration with Rayleigh-Ritz on the bordered operator.
    """
    system = assemble_saddle(space, r_ref, None, ctx)
    A_half = 0.5 * system.A
    M3 = vector_mass(system.mass)
    lu = _bordered(A_half, system.B)
    n = system.size

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, block))
    previous = np.inf
    lam_min = np.inf
    for it in range(maxiter):
        rhs = np.vstack((np.asarray(M3 @ X), np.zeros((6, block))))
        Y = lu.solve(rhs)[:n]
        if not np.all(np.isfinite(Y)):
            raise SingularSystem("Korn iteration produced non-finite values")
        H = Y.T @ (A_half @ Y)
        S = Y.T @ (M3 @ Y)
        H = 0.5 * (H + H.T)
        S = 0.5 * (S + S.T)
        try:
            evals, evecs = scipy.linalg.eigh(H, S)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"Korn Rayleigh-Ritz step failed: {exc}") from exc
        X = Y @ evecs
        X /= np.sqrt(np.einsum("ij,ij->j", X, np.asarray(M3 @ X)))[None, :]
        lam_min = float(evals[0])
        if abs(lam_min - previous) <= tol * abs(lam_min):
            logger.debug("Korn iteration converged after %d iterations: lambda=%.6e", it + 1, lam_min)
            break
        previous = lam_min
    else:
        logger.warning("Korn iteration hit %d iterations without converging", maxiter)

    if lam_min <= 0:
        raise SingularSystem(f"Korn eigenvalue is not positive: {lam_min:.3e}")
    return float(np.sqrt(lam_min))


def dump_matrices(system: SaddleSystem, directory: str | Path, prefix: str = "") -> list[Path]:
    """Write A, B and f in MatrixMarket coordinate format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / f"{prefix}A.mtx", directory / f"{prefix}B.mtx", directory / f"{prefix}f.mtx"]
    scipy.io.mmwrite(str(paths[0]), system.A)
    scipy.io.mmwrite(str(paths[1]), sp.coo_matrix(system.B))
    scipy.io.mmwrite(str(paths[2]), sp.coo_matrix(system.f[:, None]))
    return paths
