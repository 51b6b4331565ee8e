"""
Geometric forms on the discrete surface.

Every integral is taken with respect to the fixed reference metric g_{M_h};
the evolving metric never enters the volume form.
"""
from __future__ import annotations

import logging
from typing import Union

import numpy as np

from ..errors import IndefiniteMetric, MeshMismatch
from ..mesh.quadrature import QuadratureRule, quadrature_rule
from ..mesh.surface import SurfaceMesh
from .lagrange import FeField
from .refgeom import ReferenceManifold, pullback_metric
from .regge import DiscreteMetric, build_regge_space, regge_interpolate

logger = logging.getLogger(__name__)

TensorLike = Union[np.ndarray, object]


def default_quad_degree(k: int) -> int:
    return 2 * k + 3


def mesh_metric(mesh: SurfaceMesh, manifold: ReferenceManifold, k_g: int) -> DiscreteMetric:
    """
    g_{M_h} = R_h(a*g_M): the degree-k_g canonical Regge interpolant of the
    induced metric of `manifold`, pulled back through the closest point map.
    """
    sigma = pullback_metric(manifold, mesh, manifold.induced_metric)
    return regge_interpolate(build_regge_space(mesh, k_g), sigma)


class MetricContext:
    """Per-quadrature-point cache of g, g^-1 and sqrt(det g) for a reference metric."""

    def __init__(self, metric, rule: QuadratureRule):
        self.metric = metric
        self.mesh = metric.mesh
        self.rule = rule
        self._version = None
        self._refresh()

    @classmethod
    def build(cls, metric, quad_degree: int) -> "MetricContext":
        return cls(metric, quadrature_rule(quad_degree))

    def _refresh(self):
        g = self.metric.evaluate(None, self.rule.points)
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        if not np.all(det > 0) or not np.all(g[..., 0, 0] > 0):
            bad = int(np.sum(det <= 0))
            raise IndefiniteMetric(f"Reference metric is not positive definite at {bad} quadrature points")
        inv = np.empty_like(g)
        inv[..., 0, 0] = g[..., 1, 1] / det
        inv[..., 1, 1] = g[..., 0, 0] / det
        inv[..., 0, 1] = -g[..., 0, 1] / det
        inv[..., 1, 0] = -g[..., 1, 0] / det
        self._g = g
        self._ginv = inv
        self._sqrt_det = np.sqrt(det)
        self._dv = self._sqrt_det * self.rule.weights
        self._version = getattr(self.metric, "version", 0)
        logger.debug("metric context rebuilt (version %s)", self._version)

    def ensure_current(self):
        if getattr(self.metric, "version", 0) != self._version:
            self._refresh()

    @property
    def g(self) -> np.ndarray:
        self.ensure_current()
        return self._g

    @property
    def ginv(self) -> np.ndarray:
        self.ensure_current()
        return self._ginv

    @property
    def sqrt_det(self) -> np.ndarray:
        self.ensure_current()
        return self._sqrt_det

    @property
    def dv(self) -> np.ndarray:
        """Quadrature weights times volume density, (F, nq)."""
        self.ensure_current()
        return self._dv

    def area(self) -> float:
        return float(np.sum(self.dv))

    def check_field(self, *fields: FeField):
        for f in fields:
            if f.space.mesh is not self.mesh:
                raise MeshMismatch("Field and metric context live on different meshes")

    def at_quadrature(self, field: FeField):
        self.check_field(field)
        return field.evaluate(self.rule.points)

    def tensor_at_quadrature(self, tensor: TensorLike) -> np.ndarray:
        if isinstance(tensor, np.ndarray):
            return tensor
        if getattr(tensor, "mesh", self.mesh) is not self.mesh:
            raise MeshMismatch("Tensor field and metric context live on different meshes")
        return tensor.evaluate(None, self.rule.points)


def d_odot(grad_r: np.ndarray, grad_v: np.ndarray) -> np.ndarray:
    """(dr . dv)_ij = (d_i r . d_j v + d_j r . d_i v) / 2 for chart gradients (..., 3, 2)."""
    m = np.einsum("...ci,...cj->...ij", grad_r, grad_v)
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def pointwise_inner(ginv: np.ndarray, sigma: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """tr(g^-1 sigma g^-1 omega)."""
    return np.einsum("...ik,...kl,...lj,...ji->...", ginv, sigma, ginv, omega)


def inner_vector(u: FeField, v: FeField, ctx: MetricContext) -> float:
    uq, _ = ctx.at_quadrature(u)
    vq, _ = ctx.at_quadrature(v)
    return float(np.sum(ctx.dv * np.einsum("fqc,fqc->fq", uq, vq)))


def inner_tensor(sigma: TensorLike, omega: TensorLike, ctx: MetricContext) -> float:
    s = ctx.tensor_at_quadrature(sigma)
    w = ctx.tensor_at_quadrature(omega)
    return float(np.sum(ctx.dv * pointwise_inner(ctx.ginv, s, w)))


def l2_norm(u: FeField, ctx: MetricContext) -> float:
    return float(np.sqrt(max(inner_vector(u, u, ctx), 0.0)))


def d_norm(e: FeField, r: FeField, ctx: MetricContext) -> float:
    """||dr . de||_{L2(M_h)}."""
    ctx.check_field(e, r)
    _, de = ctx.at_quadrature(e)
    _, dr = ctx.at_quadrature(r)
    dd = d_odot(dr, de)
    return float(np.sqrt(max(np.sum(ctx.dv * pointwise_inner(ctx.ginv, dd, dd)), 0.0)))


def graph_norm(e: FeField, r_star: FeField, ctx: MetricContext) -> float:
    if e.space is not r_star.space:
        raise MeshMismatch("Error field and reference embedding live on different spaces")
    return float(np.hypot(l2_norm(e, ctx), d_norm(e, r_star, ctx)))


def isometry_density(r: FeField, g_target: TensorLike, ctx: MetricContext) -> np.ndarray:
    """Pointwise |dr . dr - g|^2 at the quadrature points, (F, nq)."""
    _, dr = ctx.at_quadrature(r)
    diff = d_odot(dr, dr) - ctx.tensor_at_quadrature(g_target)
    return pointwise_inner(ctx.ginv, diff, diff)


def isometry_residual(r: FeField, g_target: TensorLike, ctx: MetricContext) -> float:
    """||dr . dr - g_target||_{L2(M_h)}."""
    return float(np.sqrt(max(np.sum(ctx.dv * isometry_density(r, g_target, ctx)), 0.0)))


def integrate(values: np.ndarray, ctx: MetricContext) -> float:
    """Integral of a scalar given at the quadrature points, (F, nq)."""
    return float(np.sum(ctx.dv * values))


def surface_integral(func, ctx: MetricContext) -> float:
    """Integral of a function of the flat-mesh points x, (P, 3) -> (P,)."""
    x = ctx.mesh.chart_points(ctx.rule.points)
    values = np.asarray(func(x.reshape(-1, 3))).reshape(x.shape[:2])
    return integrate(values, ctx)


def area_ratio(ctx: MetricContext, manifold: ReferenceManifold) -> tuple[float, float]:
    """
    Range of mu_h = dA_M / dA_{M_h} over the quadrature points. Norms on M_h
    and on M are equivalent with constants min and max of mu_h.
    """
    x = ctx.mesh.chart_points(ctx.rule.points).reshape(-1, 3)
    axes = np.repeat(ctx.mesh.chart_axes, len(ctx.rule), axis=0)
    jac = np.einsum("pab,pbi->pai", manifold.jacobian(x), axes)
    gram = np.einsum("pci,pcj->pij", jac, jac)
    lifted = np.sqrt(np.linalg.det(gram)).reshape(ctx.sqrt_det.shape)
    ratio = lifted / ctx.sqrt_det
    return float(ratio.min()), float(ratio.max())
