"""
Quadrature on the reference triangle (0,0)-(1,0)-(0,1) and the unit interval.

Triangle rules are collapsed Gauss-Jacobi x Gauss-Legendre products, exact for
bivariate polynomials up to the requested degree.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from ..errors import UnsupportedDegree

MAX_DEGREE = 30


@dataclass(frozen=True)
class QuadratureRule:
    degree: int
    points: np.ndarray   # (n, 2) reference coordinates
    weights: np.ndarray  # (n,), sums to 1/2

    @property
    def barycentric(self) -> np.ndarray:
        x, y = self.points[:, 0], self.points[:, 1]
        return np.column_stack((1.0 - x - y, x, y))

    def __len__(self) -> int:
        return len(self.weights)


@lru_cache(maxsize=None)
def quadrature_rule(degree: int) -> QuadratureRule:
    """Return a triangle rule exact up to `degree`."""
    if degree < 0 or degree > MAX_DEGREE:
        raise UnsupportedDegree(f"Quadrature degree {degree} not in [0, {MAX_DEGREE}]")

    n = max(1, -(-(degree + 1) // 2))
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xl, wl = roots_legendre(n)
    u = (xj + 1.0) / 2.0
    v = (xl + 1.0) / 2.0

    x = np.repeat(u, n)
    y = np.outer(1.0 - u, v).ravel()
    # 2 from the Legendre map, 4 from the Jacobi map
    w = np.outer(wj, wl).ravel() / 8.0

    points = np.column_stack((x, y))
    points.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(degree=degree, points=points, weights=w)


@lru_cache(maxsize=None)
def gauss_line_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule on [0, 1]; weights sum to 1."""
    if n < 1:
        raise UnsupportedDegree(f"Line rule needs at least one point, got {n}")
    x, w = roots_legendre(n)
    t = (x + 1.0) / 2.0
    w = w / 2.0
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def monomial_integral(a: int, b: int) -> float:
    """Exact integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)
