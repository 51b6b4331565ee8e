"""
Tests for the metric sources of the experiments.
"""
import numpy as np
import pytest

from isoflow.errors import CurvatureNegative, OutOfInterval
from isoflow.fem.refgeom import central_rate
from isoflow.flow.ricci import conformal_sphere_source
from isoflow.flow.sources import (
    ELLIPSOID_TARGET,
    conformal_curvature,
    conformal_path,
    curvature_stays_positive,
    ellipsoid_flow,
    revolution_curvature,
    revolution_flow,
    revolution_meridian,
)


def _sphere_points(count=30, seed=0, polar_margin=0.05):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((count, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u[np.abs(u[:, 2]) < 1.0 - polar_margin]


def _tangents(manifold, q, seed=1):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(q.shape)
    n = manifold.normal(q)
    w -= np.einsum("ni,ni->n", w, n)[:, None] * n
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def _pulled_back_length(source, q, w, t, eps=1e-5):
    """|d r(t) w|^2 by central differences along the manifold."""
    manifold = source.manifold
    plus = source.embedding(manifold.closest_point(q + eps * w), t)
    minus = source.embedding(manifold.closest_point(q - eps * w), t)
    d = (plus - minus) / (2 * eps)
    return np.einsum("ni,ni->n", d, d)


class TestEllipsoidFlow:
    """Linear stretch of the (0.5, 0.5, 1) ellipsoid."""

    def test_end_point_axes(self):
        source = ellipsoid_flow()
        q = np.array([[0.5, 0.0, 0.0], [0.0, 0.0, 1.0]])
        np.testing.assert_allclose(source.embedding(q, 1.0), q * ELLIPSOID_TARGET)
        np.testing.assert_allclose(source.initial(q), q)

    def test_metric_is_pullback_of_embedding(self):
        source = ellipsoid_flow()
        q = source.manifold.closest_point(source.manifold.from_sphere(_sphere_points()))
        w = _tangents(source.manifold, q)
        for t in (0.0, 0.4, 1.0):
            g = source.metric(q, t)
            expected = np.einsum("ni,nij,nj->n", w, g, w)
            np.testing.assert_allclose(_pulled_back_length(source, q, w, t), expected, rtol=1e-7)

    def test_rate_matches_central_difference(self):
        source = ellipsoid_flow()
        q = source.manifold.from_sphere(_sphere_points())
        for t in (0.1, 0.5, 0.9):
            np.testing.assert_allclose(source.metric_rate(q, t), central_rate(source.metric)(q, t), atol=1e-8)

    def test_time_outside_interval(self):
        source = ellipsoid_flow()
        with pytest.raises(OutOfInterval):
            source.sample(1.5)
        with pytest.raises(OutOfInterval):
            source.check_time(-0.1)
        source.check_time(1.0)

    def test_sample_is_frozen_in_time(self):
        source = ellipsoid_flow()
        q = source.manifold.from_sphere(_sphere_points())
        sample = source.sample(0.3)
        np.testing.assert_allclose(sample.metric(q), source.metric(q, 0.3))
        np.testing.assert_allclose(sample.embedding(q), source.embedding(q, 0.3))

    def test_curvature_positive(self):
        source = ellipsoid_flow()
        assert curvature_stays_positive(source, _sphere_points(), np.linspace(0.0, 1.0, 6))


class TestRevolutionFlow:
    """Sphere deforming into a surface of revolution."""

    def test_identity_at_start(self):
        source = revolution_flow()
        q = _sphere_points(polar_margin=0.0)
        np.testing.assert_allclose(source.initial(q), q, atol=1e-10)

    def test_metric_is_pullback_of_embedding(self):
        source = revolution_flow()
        q = _sphere_points(seed=3)
        w = _tangents(source.manifold, q, seed=4)
        for t in (0.0, 0.5, 1.0):
            g = source.metric(q, t)
            expected = np.einsum("ni,nij,nj->n", w, g, w)
            np.testing.assert_allclose(_pulled_back_length(source, q, w, t), expected, rtol=1e-7)

    def test_rate_matches_central_difference(self):
        source = revolution_flow()
        q = _sphere_points(seed=5)
        for t in (0.2, 0.7):
            np.testing.assert_allclose(source.metric_rate(q, t), central_rate(source.metric)(q, t), atol=1e-8)

    def test_curvature_range_at_end(self):
        s = np.linspace(1e-4, np.pi - 1e-4, 20001)
        kappa = revolution_curvature(s, 1.0)
        assert kappa.min() == pytest.approx(0.055, rel=0.05)
        assert kappa.max() == pytest.approx(4.68, rel=0.05)

    def test_round_at_start(self):
        s = np.linspace(0.1, np.pi - 0.1, 50)
        np.testing.assert_allclose(revolution_curvature(s, 0.0), 1.0, rtol=1e-12)

    def test_meridian_grid(self):
        s, h, m = revolution_meridian(0.0, grid=64)
        assert len(s) == 65
        np.testing.assert_allclose(h, 1.0, atol=1e-14)
        np.testing.assert_allclose(m, np.sin(s) ** 2, atol=1e-14)
        assert m[-1] == 0.0


class TestConformalPaths:
    """g(t) = exp(2 t lam) g0 on the unit sphere."""

    def test_curvature_end_points(self):
        k0, k1, lam = np.array([1.0, 2.0]), np.array([0.5, 3.0]), np.array([0.2, -0.1])
        np.testing.assert_allclose(conformal_curvature(k0, k1, lam, 0.0), k0)
        np.testing.assert_allclose(conformal_curvature(k0, k1, lam, 1.0), k1)

    def test_sphere_source_end_curvature(self):
        """kappa_1 = exp(-2 lam)(1 - Lap lam) with Lap z^2 = 2 - 6 z^2."""
        amplitude = 0.3
        source = conformal_sphere_source(amplitude)
        q = _sphere_points(count=60, seed=6)
        z2 = q[:, 2] ** 2
        expected = np.exp(-2 * amplitude * z2) * (1.0 - amplitude * (2.0 - 6.0 * z2))
        np.testing.assert_allclose(source.curvature(q, 1.0), expected, atol=1e-6)
        np.testing.assert_allclose(source.curvature(q, 0.0), 1.0, atol=1e-12)

    def test_sphere_source_metric(self):
        source = conformal_sphere_source(0.3)
        q = _sphere_points(seed=7)
        g = source.metric(q, 0.5)
        factor = np.exp(0.3 * q[:, 2] ** 2)
        np.testing.assert_allclose(g, factor[:, None, None] * source.manifold.induced_metric(q), rtol=1e-14)
        np.testing.assert_allclose(source.metric_rate(q, 0.5), central_rate(source.metric)(q, 0.5), atol=1e-8)

    def test_large_amplitude_rejected(self):
        with pytest.raises(CurvatureNegative):
            conformal_sphere_source(1.0)

    def test_positivity_needs_curvature(self):
        source = conformal_path(lambda q: 0.1 * q[:, 0])
        with pytest.raises(ValueError):
            curvature_stays_positive(source, _sphere_points(), [0.0, 1.0])

    def test_positivity_check(self):
        source = conformal_sphere_source(0.3)
        assert curvature_stays_positive(source, _sphere_points(), np.linspace(0.0, 1.0, 11))
