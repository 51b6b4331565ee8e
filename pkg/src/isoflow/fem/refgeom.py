"""
Analytic reference manifolds and pullbacks of ambient tensors onto mesh charts.

All evaluators are vectorized over a leading point axis: points are (N, 3),
Jacobians (N, 3, 3). Ambient tensors are callables (q, t) -> (N, 3, 3) giving a
symmetric bilinear form on the tangent planes of the manifold.
"""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import ClosestPointDiverged
from ..mesh.surface import SurfaceMesh

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 50
NEWTON_TOL = 1e-14
RATE_STEP = 1e-4

AmbientTensor = Callable[[np.ndarray, float], np.ndarray]


def _as_points(p) -> tuple[np.ndarray, bool]:
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    return np.atleast_2d(p), single


class ReferenceManifold(ABC):
    kind: str = "abstract"

    @abstractmethod
    def closest_point(self, p: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def jacobian(self, p: np.ndarray) -> np.ndarray:
        """Derivative Da(p) of the closest point map."""

    @abstractmethod
    def normal(self, q: np.ndarray) -> np.ndarray:
        """Outward unit normal at points q on the manifold."""

    @abstractmethod
    def from_sphere(self, u: np.ndarray) -> np.ndarray:
        """Image of unit-sphere points under the manifold's sphere parametrization."""

    def induced_metric(self, q: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Euclidean metric restricted to the manifold, as an ambient form."""
        return np.broadcast_to(np.eye(3), (len(q), 3, 3)).copy()


class Sphere(ReferenceManifold):
    kind = "sphere"

    def __init__(self, radius: float = 1.0):
        self.radius = float(radius)

    def __repr__(self) -> str:
        return f"Sphere(radius={self.radius})"

    def _norms(self, p: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(p, axis=1)
        if np.any(r == 0.0):
            raise ClosestPointDiverged("Sphere centre has no closest point")
        return r

    def closest_point(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return self.radius * p / self._norms(p)[:, None]

    def jacobian(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        r = self._norms(p)
        n = p / r[:, None]
        proj = np.eye(3) - np.einsum("ni,nj->nij", n, n)
        return (self.radius / r)[:, None, None] * proj

    def normal(self, q):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        return q / np.linalg.norm(q, axis=1, keepdims=True)

    def from_sphere(self, u):
        return self.radius * np.asarray(u, dtype=float)

    def gaussian_curvature(self, q, t: float = 0.0):
        return np.full(len(np.atleast_2d(q)), 1.0 / self.radius**2)


class Ellipsoid(ReferenceManifold):
    """
    Axis-aligned ellipsoid sum (x_i / a_i)^2 = 1.
    The closest point solves the scalar multiplier equation
    F(mu) = sum a^2 p^2 / (a^2 + mu)^2 - 1 = 0 on its largest-root branch.
    """

    kind = "ellipsoid"

    def __init__(self, axes=(0.5, 0.5, 1.0)):
        self.axes = np.asarray(axes, dtype=float)
        if self.axes.shape != (3,) or np.any(self.axes <= 0):
            raise ValueError(f"Ellipsoid needs three positive semi-axes, got {axes}")

    def __repr__(self) -> str:
        return f"Ellipsoid(axes={tuple(self.axes)})"

    def _multiplier(self, p: np.ndarray) -> np.ndarray:
        a2 = self.axes**2
        ap2 = a2 * p**2
        active = ap2 > 0
        if not np.all(np.any(active, axis=1)):
            raise ClosestPointDiverged("Ellipsoid centre has no unique closest point")

        def terms(mu, power):
            d = a2 + mu[:, None]
            d = np.where(active, d, 1.0)
            return np.where(active, ap2 / d**power, 0.0)

        f0 = np.sum(terms(np.zeros(len(p)), 2), axis=1) - 1.0
        outside = f0 > 0
        inner_start = np.max(np.where(active, -a2 + self.axes * np.abs(p), -np.inf), axis=1)
        mu = np.where(outside, 0.0, inner_start)
        lo = mu.copy()
        hi = np.where(outside, np.sqrt(np.sum(ap2, axis=1)), 0.0)

        for _ in range(MAX_ITERATIONS):
            f = np.sum(terms(mu, 2), axis=1) - 1.0
            fp = -2.0 * np.sum(terms(mu, 3), axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                new = np.clip(mu - f / fp, lo, hi)
            done = (np.abs(f) <= NEWTON_TOL) | (np.abs(new - mu) <= 1e-16 * (1.0 + np.abs(mu)))
            mu = np.where(np.isfinite(new), new, mu)
            if np.all(done):
                return mu
        raise ClosestPointDiverged(
            f"Ellipsoid projection did not converge in {MAX_ITERATIONS} iterations"
        )

    def closest_point(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        mu = self._multiplier(p)
        a2 = self.axes**2
        return a2 * p / (a2 + mu[:, None])

    def jacobian(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        mu = self._multiplier(p)
        a2 = self.axes**2
        d = a2 + mu[:, None]
        w = -a2 * p / d**2
        f_p = 2.0 * a2 * p / d**2
        f_mu = -2.0 * np.sum(a2 * p**2 / d**3, axis=1)
        dmu = -f_p / f_mu[:, None]
        diag = np.einsum("ni,ij->nij", a2 / d, np.eye(3))
        return diag + np.einsum("ni,nj->nij", w, dmu)

    def normal(self, q):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        g = q / self.axes**2
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    def from_sphere(self, u):
        return np.asarray(u, dtype=float) * self.axes

    def gaussian_curvature(self, q, t: float = 0.0):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        a2 = self.axes**2
        s = np.sum(q**2 / a2**2, axis=1)
        return 1.0 / (np.prod(a2) * s**2)


@dataclass(frozen=True)
class RevolutionProfile:
    """Meridian (x(s), z(s)), s in [0, pi], with x(0) = x(pi) = 0 and dz = 0 at the poles."""
    x: Callable[[np.ndarray], np.ndarray]
    dx: Callable[[np.ndarray], np.ndarray]
    ddx: Callable[[np.ndarray], np.ndarray]
    z: Callable[[np.ndarray], np.ndarray]
    dz: Callable[[np.ndarray], np.ndarray]
    ddz: Callable[[np.ndarray], np.ndarray]
    name: str = "profile"


def trig_profile(a1: float, a2: float, c: float, name: str = "trig") -> RevolutionProfile:
    """x = a1 sin s + a2 sin 2s, z = c cos s."""
    return RevolutionProfile(
        x=lambda s: a1 * np.sin(s) + a2 * np.sin(2 * s),
        dx=lambda s: a1 * np.cos(s) + 2 * a2 * np.cos(2 * s),
        ddx=lambda s: -a1 * np.sin(s) - 4 * a2 * np.sin(2 * s),
        z=lambda s: c * np.cos(s),
        dz=lambda s: -c * np.sin(s),
        ddz=lambda s: -c * np.cos(s),
        name=name,
    )


class Revolution(ReferenceManifold):
    """Surface of revolution about the z-axis."""

    kind = "revolution"
    SEED_POINTS = 129

    def __init__(self, profile: RevolutionProfile):
        self.profile = profile
        self._seeds = np.linspace(0.0, np.pi, self.SEED_POINTS)

    def __repr__(self) -> str:
        return f"Revolution({self.profile.name})"

    @staticmethod
    def _polar(p: np.ndarray):
        rho = np.hypot(p[:, 0], p[:, 1])
        safe = np.where(rho > 0, rho, 1.0)
        e_rho = np.where((rho > 0)[:, None], np.column_stack((p[:, 0], p[:, 1], 0 * rho)) / safe[:, None], 0.0)
        e_theta = np.where((rho > 0)[:, None], np.column_stack((-p[:, 1], p[:, 0], 0 * rho)) / safe[:, None], 0.0)
        return rho, e_rho, e_theta

    def parameter(self, p) -> np.ndarray:
        """Meridian parameter s of the closest point."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        pr = self.profile
        rho = np.hypot(p[:, 0], p[:, 1])
        pz = p[:, 2]

        xs, zs = pr.x(self._seeds), pr.z(self._seeds)
        dist = (xs[None, :] - rho[:, None]) ** 2 + (zs[None, :] - pz[:, None]) ** 2
        s = self._seeds[np.argmin(dist, axis=1)]

        for _ in range(MAX_ITERATIONS):
            x, dx, ddx = pr.x(s), pr.dx(s), pr.ddx(s)
            z, dz, ddz = pr.z(s), pr.dz(s), pr.ddz(s)
            g = (x - rho) * dx + (z - pz) * dz
            gs = dx**2 + (x - rho) * ddx + dz**2 + (z - pz) * ddz
            if np.any(gs <= 0):
                raise ClosestPointDiverged("Point lies beyond the reach of the surface of revolution")
            new = np.clip(s - g / gs, 0.0, np.pi)
            step = np.abs(new - s)
            s = new
            if np.all((step <= 1e-15) | (np.abs(g) <= NEWTON_TOL)):
                return s
        raise ClosestPointDiverged(
            f"Meridian projection did not converge in {MAX_ITERATIONS} iterations"
        )

    def closest_point(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        s = self.parameter(p)
        _, e_rho, _ = self._polar(p)
        q = self.profile.x(s)[:, None] * e_rho
        q[:, 2] = self.profile.z(s)
        return q

    def jacobian(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        pr = self.profile
        s = self.parameter(p)
        rho, e_rho, e_theta = self._polar(p)
        x, dx, ddx = pr.x(s), pr.dx(s), pr.ddx(s)
        z, dz, ddz = pr.z(s), pr.dz(s), pr.ddz(s)
        gs = dx**2 + (x - rho) * ddx + dz**2 + (z - p[:, 2]) * ddz

        a_s = dx[:, None] * e_rho
        a_s[:, 2] += dz
        jac = np.einsum("ni,nj->nij", a_s, a_s) / gs[:, None, None]
        on_axis = rho == 0
        scale = np.where(on_axis, 0.0, x / np.where(on_axis, 1.0, rho))
        jac += scale[:, None, None] * np.einsum("ni,nj->nij", e_theta, e_theta)
        if np.any(on_axis):
            c = dx[on_axis] ** 2 / gs[on_axis]
            jac[on_axis] = np.einsum("n,ij->nij", c, np.diag([1.0, 1.0, 0.0]))
        return jac

    def normal(self, q):
        q = np.atleast_2d(np.asarray(q, dtype=float))
        s = self.parameter(q)
        _, e_rho, _ = self._polar(q)
        n = -self.profile.dz(s)[:, None] * e_rho
        n[:, 2] += self.profile.dx(s)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def from_sphere(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        s = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
        _, e_rho, _ = self._polar(u)
        q = self.profile.x(s)[:, None] * e_rho
        q[:, 2] = self.profile.z(s)
        return q

    def gaussian_curvature(self, q, t: float = 0.0):
        s = self.parameter(q)
        pr = self.profile
        s = np.clip(s, 1e-6, np.pi - 1e-6)
        dx, ddx, dz, ddz = pr.dx(s), pr.ddx(s), pr.dz(s), pr.ddz(s)
        return dz * (dx * ddz - ddx * dz) / (pr.x(s) * (dx**2 + dz**2) ** 2)


def closest_point(manifold: ReferenceManifold, p) -> np.ndarray:
    pts, single = _as_points(p)
    q = manifold.closest_point(pts)
    return q[0] if single else q


def closest_point_jacobian(manifold: ReferenceManifold, p) -> np.ndarray:
    pts, single = _as_points(p)
    jac = manifold.jacobian(pts)
    return jac[0] if single else jac


def central_rate(tensor: AmbientTensor, delta: float = RATE_STEP) -> AmbientTensor:
    """Fourth-order central difference in t of an ambient tensor."""

    def rate(q, t):
        return (
            -tensor(q, t + 2 * delta)
            + 8 * tensor(q, t + delta)
            - 8 * tensor(q, t - delta)
            + tensor(q, t - 2 * delta)
        ) / (12 * delta)

    return rate


class PulledBackMetric:
    """
    a*G represented in each triangle's affine chart: (Da J0)^T G (Da J0).
    Closest points and Jacobians are cached per evaluation layout.
    """

    version = 0
    CACHE_SIZE = 8

    def __init__(
        self,
        manifold: ReferenceManifold,
        mesh: SurfaceMesh,
        tensor: AmbientTensor,
        rate: Optional[AmbientTensor] = None,
    ):
        self.manifold = manifold
        self.mesh = mesh
        self.tensor = tensor
        self.rate_tensor = rate if rate is not None else central_rate(tensor)
        self._cache: dict = {}

    def geometry(self, elements: Optional[np.ndarray], points: np.ndarray):
        """Closest points (P, 3) and chart Jacobians (P, 3, 2) for the flattened layout."""
        points = np.asarray(points, dtype=float)
        key = (points.shape, points.tobytes(), None if elements is None else np.asarray(elements).tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit

        if elements is None:
            elements = np.arange(self.mesh.n_triangles)
        elements = np.asarray(elements)
        x = self.mesh.chart_points(points, elements)
        m, nq = x.shape[:2]
        flat = x.reshape(-1, 3)
        q = self.manifold.closest_point(flat)
        da = self.manifold.jacobian(flat)
        axes = np.repeat(self.mesh.chart_axes[elements], nq, axis=0)
        jac = np.einsum("pab,pbi->pai", da, axes)

        if len(self._cache) >= self.CACHE_SIZE:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = (q, jac, (m, nq))
        return q, jac, (m, nq)

    def _pull(self, ambient: AmbientTensor, elements, points, t):
        q, jac, (m, nq) = self.geometry(elements, points)
        g = ambient(q, t)
        out = np.einsum("pai,pab,pbj->pij", jac, g, jac)
        out = 0.5 * (out + np.swapaxes(out, -1, -2))
        return out.reshape(m, nq, 2, 2)

    def evaluate(self, elements, points, t: float = 0.0) -> np.ndarray:
        return self._pull(self.tensor, elements, points, t)

    __call__ = evaluate

    def rate(self, elements, points, t: float = 0.0) -> np.ndarray:
        return self._pull(self.rate_tensor, elements, points, t)

    def at(self, t: float) -> "FrozenTensor":
        return FrozenTensor(lambda e, p: self.evaluate(e, p, t), self.mesh)

    def rate_at(self, t: float) -> "FrozenTensor":
        return FrozenTensor(lambda e, p: self.rate(e, p, t), self.mesh)


class FrozenTensor:
    """A chart tensor field at a fixed time."""

    version = 0

    def __init__(self, func, mesh: SurfaceMesh):
        self._func = func
        self.mesh = mesh

    def evaluate(self, elements, points) -> np.ndarray:
        return self._func(elements, points)


def pullback_metric(
    manifold: ReferenceManifold,
    mesh: SurfaceMesh,
    ambient_tensor: AmbientTensor,
    rate: Optional[AmbientTensor] = None,
) -> PulledBackMetric:
    return PulledBackMetric(manifold, mesh, ambient_tensor, rate)
