"""
Evolving metrics g(t) on a reference manifold, with their time derivatives
and, where known, the exact embeddings realizing them.

Metrics are ambient forms: callables (q, t) -> (N, 3, 3) acting on tangent
vectors of the reference manifold at the points q.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import OutOfInterval
from ..fem.refgeom import (
    AmbientTensor,
    Ellipsoid,
    PulledBackMetric,
    ReferenceManifold,
    Sphere,
    central_rate,
    pullback_metric,
)
from ..mesh.surface import SurfaceMesh

logger = logging.getLogger(__name__)

TIME_SLACK = 1e-12

PointMap = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class MetricSample:
    t: float
    metric: Callable[[np.ndarray], np.ndarray]
    rate: Callable[[np.ndarray], np.ndarray]
    embedding: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class MetricSource:
    name: str
    manifold: ReferenceManifold
    metric: AmbientTensor
    rate: Optional[AmbientTensor] = None
    embedding: Optional[PointMap] = None
    initial_embedding: Optional[Callable[[np.ndarray], np.ndarray]] = None
    interval: tuple[float, float] = (0.0, 1.0)
    positive_curvature: bool = True
    curvature: Optional[PointMap] = None
    details: dict = field(default_factory=dict)

    def check_time(self, t: float):
        lo, hi = self.interval
        if t < lo - TIME_SLACK or t > hi + TIME_SLACK:
            raise OutOfInterval(f"{self.name}: t={t} outside [{lo}, {hi}]")

    def metric_rate(self, q: np.ndarray, t: float) -> np.ndarray:
        if self.rate is not None:
            return self.rate(q, t)
        return central_rate(self.metric)(q, t)

    def sample(self, t: float) -> MetricSample:
        self.check_time(t)
        emb = None
        if self.embedding is not None:
            emb = lambda q: self.embedding(q, t)
        return MetricSample(
            t=t,
            metric=lambda q: self.metric(q, t),
            rate=lambda q: self.metric_rate(q, t),
            embedding=emb,
        )

    def initial(self, q: np.ndarray) -> np.ndarray:
        """r(0) at points of the reference manifold."""
        if self.initial_embedding is not None:
            return self.initial_embedding(q)
        if self.embedding is not None:
            return self.embedding(q, self.interval[0])
        raise ValueError(f"{self.name} has no initial embedding")

    def pullback(self, mesh: SurfaceMesh) -> PulledBackMetric:
        return pullback_metric(self.manifold, mesh, self.metric, self.metric_rate)


def _diagonal(values: np.ndarray, count: int) -> np.ndarray:
    return np.broadcast_to(np.diag(values), (count, 3, 3)).copy()


def _identity(q: np.ndarray) -> np.ndarray:
    return np.array(q, dtype=float, copy=True)


# --- ellipsoid ------------------------------------------------------------

ELLIPSOID_AXES = (0.5, 0.5, 1.0)
ELLIPSOID_TARGET = np.array([0.5, 0.5, 1.0 / 3.0])


def _ellipsoid_scale(t: float) -> np.ndarray:
    return (1.0 - t) + t * ELLIPSOID_TARGET


def ellipsoid_flow(axes=ELLIPSOID_AXES) -> MetricSource:
    """
    r(t, p) = diag((1 - t) + t c) p on the ellipsoid `axes`, c = (1/2, 1/2, 1/3);
    g(t) = dr . dr.
    """
    manifold = Ellipsoid(axes)
    d_scale = ELLIPSOID_TARGET - 1.0

    def metric(q, t):
        return _diagonal(_ellipsoid_scale(t) ** 2, len(q))

    def rate(q, t):
        return _diagonal(2.0 * _ellipsoid_scale(t) * d_scale, len(q))

    def embedding(q, t):
        return np.asarray(q) * _ellipsoid_scale(t)

    def curvature(q, t):
        image = Ellipsoid(manifold.axes * _ellipsoid_scale(t))
        return image.gaussian_curvature(embedding(q, t))

    return MetricSource(
        name="ellipsoid",
        manifold=manifold,
        metric=metric,
        rate=rate,
        embedding=embedding,
        interval=(0.0, 1.0),
        curvature=curvature,
    )


# --- surface of revolution ------------------------------------------------

def _polar_frame(q: np.ndarray):
    q = np.atleast_2d(np.asarray(q, dtype=float))
    rho = np.hypot(q[:, 0], q[:, 1])
    sin_s = rho
    cos_s = q[:, 2]
    safe = np.where(rho > 0, rho, 1.0)
    e_theta = np.column_stack((-q[:, 1], q[:, 0], np.zeros(len(q)))) / safe[:, None]
    e_theta[rho == 0] = 0.0
    return sin_s, cos_s, e_theta


def revolution_factor(sin_s, cos_s, t):
    """f, f_s, f_ss, f_t, f_st of x(s, t) = sin(s) f(s, t)."""
    sin4 = sin_s**4
    f = (1.0 - 0.32 * t) + 0.48 * t * sin4
    f_s = 1.92 * t * sin_s**3 * cos_s
    f_ss = 1.92 * t * (3.0 * sin_s**2 * cos_s**2 - sin4)
    f_t = -0.32 + 0.48 * sin4
    f_st = 1.92 * sin_s**3 * cos_s
    return f, f_s, f_ss, f_t, f_st


def revolution_flow() -> MetricSource:
    """
    Metric (x_s^2 + z_s^2) ds^2 + x^2 dtheta^2 on the unit sphere in polar
    coordinates, x = sin(s)((1 - 0.32 t) + 0.48 t (cos^2 s - 1)^2), z = cos s.
    Realized by r = (f q_x, f q_y, q_z).
    """
    manifold = Sphere(1.0)

    def _pieces(q, t):
        sin_s, cos_s, e_theta = _polar_frame(q)
        f, f_s, _, f_t, f_st = revolution_factor(sin_s, cos_s, t)
        x_s = cos_s * f + sin_s * f_s
        x_st = cos_s * f_t + sin_s * f_st
        a = x_s**2 + sin_s**2
        b = f**2
        proj = np.eye(3) - np.einsum("ni,nj->nij", q, q)
        ethe = np.einsum("ni,nj->nij", e_theta, e_theta)
        return a, b, 2.0 * x_s * x_st, 2.0 * f * f_t, proj, ethe

    def metric(q, t):
        a, b, _, _, proj, ethe = _pieces(q, t)
        return a[:, None, None] * proj + (b - a)[:, None, None] * ethe

    def rate(q, t):
        _, _, a_t, b_t, proj, ethe = _pieces(q, t)
        return a_t[:, None, None] * proj + (b_t - a_t)[:, None, None] * ethe

    def embedding(q, t):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        sin_s, cos_s, _ = _polar_frame(q)
        f = revolution_factor(sin_s, cos_s, t)[0]
        return np.column_stack((f * q[:, 0], f * q[:, 1], q[:, 2]))

    def curvature(q, t):
        sin_s, cos_s, _ = _polar_frame(q)
        s = np.clip(np.arctan2(sin_s, cos_s), 1e-6, np.pi - 1e-6)
        return revolution_curvature(s, t)

    return MetricSource(
        name="revolution",
        manifold=manifold,
        metric=metric,
        rate=rate,
        embedding=embedding,
        interval=(0.0, 1.0),
        curvature=curvature,
    )


def revolution_curvature(s: np.ndarray, t: float) -> np.ndarray:
    """Gaussian curvature of the revolution metric at polar angle s."""
    sin_s, cos_s = np.sin(s), np.cos(s)
    f, f_s, f_ss, _, _ = revolution_factor(sin_s, cos_s, t)
    x = sin_s * f
    x_s = cos_s * f + sin_s * f_s
    x_ss = -sin_s * f + 2.0 * cos_s * f_s + sin_s * f_ss
    z_s, z_ss = -sin_s, -cos_s
    return z_s * (x_s * z_ss - x_ss * z_s) / (x * (x_s**2 + z_s**2) ** 2)


def revolution_meridian(t: float, grid: int = 512):
    """(s, h, m) of the revolution metric on a uniform grid."""
    s = np.linspace(0.0, np.pi, grid + 1)
    sin_s, cos_s = np.sin(s), np.cos(s)
    sin_s[-1] = 0.0
    f, f_s, _, _, _ = revolution_factor(sin_s, cos_s, t)
    x = sin_s * f
    x_s = cos_s * f + sin_s * f_s
    return s, x_s**2 + sin_s**2, x**2


# --- conformal paths ------------------------------------------------------

def conformal_curvature(kappa0, kappa1, lam, t: float):
    """Curvature along g(t) = exp(2 t lam) g0 from the end-point curvatures."""
    kappa0, kappa1, lam = (np.asarray(a, dtype=float) for a in (kappa0, kappa1, lam))
    return np.exp(-2.0 * t * lam) * ((1.0 - t) * kappa0 + t * np.exp(2.0 * lam) * kappa1)


def conformal_path(
    lam: Callable[[np.ndarray], np.ndarray],
    manifold: Optional[ReferenceManifold] = None,
    kappa0: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    kappa1: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> MetricSource:
    """g(t) = exp(2 t lam) g0 with g0 the induced metric of `manifold`."""
    manifold = manifold if manifold is not None else Sphere(1.0)

    def metric(q, t):
        return np.exp(2.0 * t * lam(q))[:, None, None] * manifold.induced_metric(q)

    def rate(q, t):
        lq = lam(q)
        return (2.0 * lq * np.exp(2.0 * t * lq))[:, None, None] * manifold.induced_metric(q)

    curvature = None
    if kappa0 is not None and kappa1 is not None:
        def curvature(q, t):
            return conformal_curvature(kappa0(q), kappa1(q), lam(q), t)

    return MetricSource(
        name="conformal",
        manifold=manifold,
        metric=metric,
        rate=rate,
        initial_embedding=_identity,
        interval=(0.0, 1.0),
        positive_curvature=True,
        curvature=curvature,
    )


def curvature_stays_positive(source: MetricSource, points: np.ndarray, times) -> bool:
    """Sampled check that the source curvature is positive at `points` for all `times`."""
    if source.curvature is None:
        raise ValueError(f"{source.name} has no curvature evaluator")
    q = source.manifold.closest_point(points)
    return all(bool(np.all(source.curvature(q, float(t)) > 0)) for t in times)
