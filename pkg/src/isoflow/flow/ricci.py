"""
Axisymmetric normalized Ricci flow on S^2.

Metrics are g = h ds^2 + m dtheta^2 on a uniform polar grid s in [0, pi].
The flow d_t g = 2 (kbar - kappa) g is conformal, so it is integrated for
the conformal factor u of g = exp(2u) g0 in fixed coordinates:

    d_t u = kbar - exp(-2u) (kappa0 - Lap_g0 u)

with a conservative finite-volume Laplacian (pole half-cells included), so
the discrete area is an invariant of the semi-discrete system.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from ..errors import CurvatureNegative, DegenerateProfile, StepUnstable
from ..fem.refgeom import Revolution, RevolutionProfile, trig_profile
from .sources import MetricSource, conformal_curvature, conformal_path

logger = logging.getLogger(__name__)

DEFAULT_GRID = 512
RK4_STABILITY = 2.78
KNOT_SPACING = 1e-3
POLE_TOL = 1e-12

EXAMPLE_PROFILE = trig_profile(0.7, 0.1, 0.5, name="egg")


@dataclass
class AxisymProfile:
    s: np.ndarray
    h: np.ndarray
    m: np.ndarray
    t: float = 0.0

    @classmethod
    def from_meridian(cls, profile: RevolutionProfile, grid: int = DEFAULT_GRID) -> "AxisymProfile":
        """Induced metric of the surface of revolution of `profile`."""
        s = np.linspace(0.0, np.pi, grid + 1)
        x = profile.x(s)
        x[0] = x[-1] = 0.0
        return cls(s=s, h=profile.dx(s) ** 2 + profile.dz(s) ** 2, m=x**2)

    @classmethod
    def round(cls, grid: int = DEFAULT_GRID, radius: float = 1.0) -> "AxisymProfile":
        s = np.linspace(0.0, np.pi, grid + 1)
        m = (radius * np.sin(s)) ** 2
        m[0] = m[-1] = 0.0
        return cls(s=s, h=np.full_like(s, radius**2), m=m)

    @property
    def spacing(self) -> float:
        return float(self.s[1] - self.s[0])

    def validate(self):
        if np.any(self.h <= 0):
            raise DegenerateProfile("h must be positive on the whole grid")
        if np.any(self.m[1:-1] <= 0):
            raise DegenerateProfile("m must be positive away from the poles")
        scale = float(np.max(self.m))
        if abs(self.m[0]) > POLE_TOL * scale or abs(self.m[-1]) > POLE_TOL * scale:
            raise DegenerateProfile("m must vanish at both poles")

    def area(self) -> float:
        return float(2.0 * np.pi * simpson(np.sqrt(self.h * np.clip(self.m, 0.0, None)), x=self.s))

    def pole_compatibility(self) -> tuple[float, float]:
        """(sqrt m)' / sqrt h at both poles; 1 for a smooth closing metric."""
        ds = self.spacing
        root = np.sqrt(np.clip(self.m, 0.0, None))
        c = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * ds)
        north = float(c @ root[:5]) / np.sqrt(self.h[0])
        south = float(c @ root[::-1][:5]) / np.sqrt(self.h[-1])
        return north, south


def _extend(values: np.ndarray, parity: float) -> np.ndarray:
    """Two ghost nodes past each pole by reflection with the given parity."""
    left = parity * values[2:0:-1]
    right = parity * values[-2:-4:-1]
    return np.concatenate((left, values, right))


def _derivative(values: np.ndarray, ds: float, parity: float) -> np.ndarray:
    f = _extend(values, parity)
    return (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * ds)


def _pole_value(s: np.ndarray, values: np.ndarray) -> float:
    """Value at s = 0 of the even quartic through the first three interior nodes."""
    x = s[1:4] ** 2
    coeffs = np.linalg.solve(np.vander(x, 3, increasing=True), values[1:4])
    return float(coeffs[0])


def axisym_curvature(profile: AxisymProfile) -> np.ndarray:
    """kappa = -(1 / sqrt(h m)) ((sqrt m)' / sqrt h)' with fourth-order differences."""
    profile.validate()
    ds = profile.spacing
    root_m = np.sqrt(np.clip(profile.m, 0.0, None))
    root_h = np.sqrt(profile.h)
    flux = _derivative(root_m, ds, -1.0) / root_h
    dflux = _derivative(flux, ds, 1.0)

    kappa = np.empty_like(root_m)
    kappa[1:-1] = -dflux[1:-1] / (root_h[1:-1] * root_m[1:-1])
    kappa[0] = _pole_value(profile.s, kappa)
    kappa[-1] = _pole_value(profile.s, kappa[::-1])
    return kappa


def total_curvature(profile: AxisymProfile, kappa: Optional[np.ndarray] = None) -> float:
    """Integral of kappa dA; 4 pi on S^2."""
    if kappa is None:
        kappa = axisym_curvature(profile)
    density = kappa * np.sqrt(profile.h * np.clip(profile.m, 0.0, None))
    return float(2.0 * np.pi * simpson(density, x=profile.s))


class _ConformalLaplacian:
    """Finite-volume Lap_g0 on the polar grid."""

    def __init__(self, profile: AxisymProfile):
        ds = profile.spacing
        root_hm = np.sqrt(profile.h * np.clip(profile.m, 0.0, None))
        ratio = np.sqrt(np.clip(profile.m, 0.0, None) / profile.h)
        self.face = 0.5 * (ratio[:-1] + ratio[1:]) / ds          # (M,)
        cells = root_hm * ds
        half = 0.5 * (root_hm[:-1] + root_hm[1:])
        cells[0] = half[0] * ds / 4.0
        cells[-1] = half[-1] * ds / 4.0
        self.cells = cells

    def __call__(self, u: np.ndarray) -> np.ndarray:
        flux = self.face * np.diff(u)
        out = np.zeros_like(u)
        out[:-1] += flux
        out[1:] -= flux
        return out / self.cells

    def spectral_bound(self) -> np.ndarray:
        """Per-node Gershgorin bound of the operator."""
        diag = np.zeros_like(self.cells)
        diag[:-1] += self.face
        diag[1:] += self.face
        return 2.0 * diag / self.cells


@dataclass
class RicciTrajectory:
    initial: AxisymProfile
    times: np.ndarray          # knot times
    u: np.ndarray              # (n_knots, grid + 1)
    du: np.ndarray             # (n_knots, grid + 1)
    kappa0: np.ndarray
    kappa_bar: float
    steps: int
    source: Optional[MetricSource] = None
    _spline: Optional[CubicHermiteSpline] = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def end_time(self) -> float:
        return float(self.times[-1])

    def _conformal(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        if len(self.times) == 1:
            return self.u[0], self.du[0]
        if self._spline is None:
            self._spline = CubicHermiteSpline(self.times, self.u, self.du, axis=0)
        t = float(np.clip(t, self.times[0], self.times[-1]))
        return self._spline(t), self._spline(t, 1)

    def profile_at(self, t: float) -> AxisymProfile:
        u, _ = self._conformal(t)
        scale = np.exp(2.0 * u)
        p0 = self.initial
        return AxisymProfile(s=p0.s, h=scale * p0.h, m=scale * p0.m, t=float(t))

    def curvature_at(self, t: float) -> np.ndarray:
        u, du = self._conformal(t)
        return self.kappa_bar - du

    def splines_at(self, t: float):
        """Cubic splines in s of u and d_t u at time t, clamped by pole symmetry."""
        key = float(t)
        hit = self._cache.get(key)
        if hit is None:
            u, du = self._conformal(t)
            s = self.initial.s
            clamp = ((1, 0.0), (1, 0.0))
            hit = (CubicSpline(s, u, bc_type=clamp), CubicSpline(s, du, bc_type=clamp))
            if len(self._cache) > 16:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def max_curvature_deviation(self, t: float) -> float:
        return float(np.max(np.abs(self.curvature_at(t) - self.kappa_bar)))

    def write_csv(self, directory: str | Path, times: Sequence[float]) -> list[Path]:
        """One CSV per sample time with columns s, h, m, kappa."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for t in times:
            prof = self.profile_at(t)
            kappa = self.curvature_at(t)
            path = directory / f"ricci_profile_t{t:.4f}.csv"
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(["s", "h", "m", "kappa"])
                for row in zip(prof.s, prof.h, prof.m, kappa):
                    writer.writerow([repr(float(v)) for v in row])
            paths.append(path)
        return paths


def ricci_axisym_run(
    profile0: AxisymProfile,
    tau_r: Optional[float] = None,
    T: float = 0.4,
    manifold: Optional[Revolution] = None,
    knot_spacing: float = KNOT_SPACING,
    safety: float = 0.5,
) -> RicciTrajectory:
    """
    Integrate the normalized flow to time T with RK4. The step is the smaller
    of `tau_r` and the stability bound, refreshed at every knot. When
    `manifold` is given the trajectory carries the lifted metric source.
    """
    profile0.validate()
    kappa0 = axisym_curvature(profile0)
    if np.any(kappa0 <= 0):
        raise CurvatureNegative(f"Initial curvature has minimum {kappa0.min():.4g}")

    lap = _ConformalLaplacian(profile0)
    kappa_bar = float(np.sum(kappa0 * lap.cells) / np.sum(lap.cells))
    bound = lap.spectral_bound()

    def rhs(u):
        return kappa_bar - np.exp(-2.0 * u) * (kappa0 - lap(u))

    n_knots = max(1, int(np.ceil(T / knot_spacing - 1e-9))) if T > 0 else 0
    times = np.linspace(0.0, T, n_knots + 1)
    u = np.zeros_like(kappa0)
    U, dU = [u.copy()], [rhs(u)]
    steps = 0
    warned = False

    for k in range(n_knots):
        span = times[k + 1] - times[k]
        stable = safety * RK4_STABILITY / float(np.max(bound * np.exp(-2.0 * u)))
        tau = stable if tau_r is None else min(tau_r, stable)
        if tau_r is not None and tau_r > stable and not warned:
            logger.warning("tau_r=%.3e exceeds the RK4 stability bound %.3e; using the bound", tau_r, stable)
            warned = True
        n_sub = max(1, int(np.ceil(span / tau)))
        dt = span / n_sub
        for _ in range(n_sub):
            k1 = rhs(u)
            k2 = rhs(u + 0.5 * dt * k1)
            k3 = rhs(u + 0.5 * dt * k2)
            k4 = rhs(u + dt * k3)
            u = u + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        steps += n_sub
        if not np.all(np.isfinite(u)):
            raise StepUnstable(f"Ricci flow blew up before t={times[k + 1]:.4g}")
        du = rhs(u)
        kappa = kappa_bar - du
        if np.any(kappa <= 0):
            raise CurvatureNegative(f"Curvature reached {kappa.min():.4g} at t={times[k + 1]:.4g}")
        U.append(u.copy())
        dU.append(du)

    traj = RicciTrajectory(
        initial=profile0,
        times=times,
        u=np.array(U),
        du=np.array(dU),
        kappa0=kappa0,
        kappa_bar=kappa_bar,
        steps=steps,
    )
    logger.info(
        "ricci flow to T=%.3g: %d RK4 steps, kbar=%.6f, max|k-kbar| %.3e -> %.3e",
        T, steps, kappa_bar, traj.max_curvature_deviation(0.0), traj.max_curvature_deviation(T),
    )
    north, south = traj.profile_at(T).pole_compatibility()
    if max(abs(north - 1.0), abs(south - 1.0)) > 1e-3:
        logger.warning("pole compatibility drifted: north=%.6f south=%.6f", north, south)
    if manifold is not None:
        traj.source = ricci_flow_source(traj, manifold)
    return traj


def ricci_flow_source(traj: RicciTrajectory, manifold: Revolution) -> MetricSource:
    """
    Lift the axisymmetric trajectory to the surface of revolution whose
    induced metric is the initial profile: g(t) = exp(2 u(s, t)) g0.
    """

    def metric(q, t):
        u_spline, _ = traj.splines_at(t)
        s = manifold.parameter(q)
        return np.exp(2.0 * u_spline(s))[:, None, None] * manifold.induced_metric(q)

    def rate(q, t):
        u_spline, du_spline = traj.splines_at(t)
        s = manifold.parameter(q)
        factor = 2.0 * du_spline(s) * np.exp(2.0 * u_spline(s))
        return factor[:, None, None] * manifold.induced_metric(q)

    def curvature(q, t):
        _, du_spline = traj.splines_at(t)
        return traj.kappa_bar - du_spline(manifold.parameter(q))

    return MetricSource(
        name="ricci",
        manifold=manifold,
        metric=metric,
        rate=rate,
        initial_embedding=lambda q: np.array(q, dtype=float, copy=True),
        interval=(0.0, traj.end_time),
        curvature=curvature,
        details={"kappa_bar": traj.kappa_bar, "steps": traj.steps},
    )


def conformal_sphere_source(amplitude: float, grid: int = DEFAULT_GRID) -> MetricSource:
    """
    Conformal path from the round sphere to exp(2 lam) g_S2, lam = amplitude cos^2 s.
    The end-point curvature comes from the axisymmetric formula.
    """
    s = np.linspace(0.0, np.pi, grid + 1)
    lam_s = amplitude * np.cos(s) ** 2
    m = np.exp(2.0 * lam_s) * np.sin(s) ** 2
    m[0] = m[-1] = 0.0
    kappa1_s = axisym_curvature(AxisymProfile(s=s, h=np.exp(2.0 * lam_s), m=m))
    kappa1_spline = CubicSpline(s, kappa1_s, bc_type=((1, 0.0), (1, 0.0)))

    def lam(q):
        return amplitude * np.asarray(q)[:, 2] ** 2

    def kappa1(q):
        return kappa1_spline(np.arccos(np.clip(np.asarray(q)[:, 2], -1.0, 1.0)))

    source = conformal_path(lam, kappa0=lambda q: np.ones(len(q)), kappa1=kappa1)
    times = np.linspace(0.0, 1.0, 11)
    kappa_t = [conformal_curvature(np.ones_like(s), kappa1_s, lam_s, t) for t in times]
    if min(float(k.min()) for k in kappa_t) <= 0:
        raise CurvatureNegative(f"Conformal path with amplitude {amplitude} loses positive curvature")
    return source
