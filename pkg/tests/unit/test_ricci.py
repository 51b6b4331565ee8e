"""
Tests for the axisymmetric Ricci flow: curvature formula, invariants of the
integrator and the lifted metric source.
"""
import csv
import logging

import numpy as np
import pytest

from isoflow.errors import DegenerateProfile
from isoflow.fem.refgeom import Revolution
from isoflow.flow.ricci import (
    EXAMPLE_PROFILE,
    AxisymProfile,
    axisym_curvature,
    ricci_axisym_run,
    total_curvature,
)


@pytest.fixture(scope="module")
def egg():
    return AxisymProfile.from_meridian(EXAMPLE_PROFILE, grid=256)


@pytest.fixture(scope="module")
def short_run(egg):
    return ricci_axisym_run(egg, T=0.05, manifold=Revolution(EXAMPLE_PROFILE))


class TestCurvature:
    """kappa from (h, m)."""

    def test_round_sphere(self):
        kappa = axisym_curvature(AxisymProfile.round(512))
        np.testing.assert_allclose(kappa, 1.0, atol=1e-6)

    def test_scaled_sphere(self):
        kappa = axisym_curvature(AxisymProfile.round(256, radius=2.0))
        np.testing.assert_allclose(kappa, 0.25, atol=1e-6)

    def test_gauss_bonnet(self):
        profile = AxisymProfile.from_meridian(EXAMPLE_PROFILE, grid=512)
        assert total_curvature(profile) == pytest.approx(4 * np.pi, abs=1e-4)

    def test_matches_surface_of_revolution(self, egg):
        s = egg.s[10:-10]
        manifold = Revolution(EXAMPLE_PROFILE)
        points = np.column_stack((EXAMPLE_PROFILE.x(s), np.zeros_like(s), EXAMPLE_PROFILE.z(s)))
        np.testing.assert_allclose(axisym_curvature(egg)[10:-10], manifold.gaussian_curvature(points), rtol=1e-5)

    def test_round_profile_is_compatible_at_poles(self):
        north, south = AxisymProfile.round(256).pole_compatibility()
        assert north == pytest.approx(1.0, abs=1e-6)
        assert south == pytest.approx(1.0, abs=1e-6)


class TestValidation:
    """Degenerate profiles are rejected."""

    def test_negative_m(self):
        profile = AxisymProfile.round(64)
        profile.m[10] = -1.0
        with pytest.raises(DegenerateProfile):
            axisym_curvature(profile)

    def test_open_pole(self):
        profile = AxisymProfile.round(64)
        profile.m[0] = 0.1
        with pytest.raises(DegenerateProfile):
            profile.validate()

    def test_nonpositive_h(self):
        profile = AxisymProfile.round(64)
        profile.h[5] = 0.0
        with pytest.raises(DegenerateProfile):
            ricci_axisym_run(profile, T=0.01)


class TestIntegrator:
    """RK4 integration of the conformal factor."""

    def test_round_sphere_is_stationary(self):
        traj = ricci_axisym_run(AxisymProfile.round(256), T=0.05)
        assert np.abs(traj.u).max() <= 1e-8
        assert traj.kappa_bar == pytest.approx(1.0, abs=1e-6)

    def test_area_conserved(self, egg, short_run):
        assert short_run.profile_at(0.05).area() == pytest.approx(egg.area(), rel=1e-4)

    def test_curvature_approaches_mean(self, short_run):
        assert short_run.max_curvature_deviation(0.05) < short_run.max_curvature_deviation(0.0)

    def test_knots(self, short_run):
        assert short_run.end_time == pytest.approx(0.05)
        assert len(short_run.times) == 51
        np.testing.assert_allclose(np.diff(short_run.times), 1e-3, rtol=1e-9)
        assert short_run.steps >= 50

    def test_initial_curvature_recovered(self, egg, short_run):
        np.testing.assert_allclose(short_run.curvature_at(0.0), axisym_curvature(egg), atol=1e-10)
        assert short_run.profile_at(0.0).m == pytest.approx(egg.m)

    def test_zero_final_time(self, egg):
        traj = ricci_axisym_run(egg, T=0.0)
        assert traj.end_time == 0.0
        assert traj.steps == 0
        np.testing.assert_allclose(traj.profile_at(0.0).h, egg.h)

    def test_large_step_is_clipped(self, egg, caplog, monkeypatch):
        monkeypatch.setattr(logging.getLogger("isoflow"), "propagate", True)
        with caplog.at_level(logging.WARNING, logger="isoflow.flow.ricci"):
            traj = ricci_axisym_run(egg, tau_r=1.0, T=0.002)
        assert "stability bound" in caplog.text
        assert np.all(np.isfinite(traj.u))

    def test_csv_profiles(self, short_run, tmp_path):
        paths = short_run.write_csv(tmp_path, [0.0, 0.05])
        assert [p.name for p in paths] == ["ricci_profile_t0.0000.csv", "ricci_profile_t0.0500.csv"]
        with open(paths[1], newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["s", "h", "m", "kappa"]
        assert len(rows) == 1 + 257
        assert float(rows[1][0]) == 0.0


class TestLiftedSource:
    """Ricci flow as a metric source on the surface of revolution."""

    def test_interval_and_initial_metric(self, short_run):
        source = short_run.source
        assert source.interval == (0.0, pytest.approx(0.05))
        manifold = source.manifold
        q = manifold.from_sphere(np.array([[0.6, 0.0, 0.8], [0.0, 1.0, 0.0]]))
        np.testing.assert_allclose(source.metric(q, 0.0), manifold.induced_metric(q), atol=1e-12)

    def test_rate_is_conformal(self, short_run):
        source = short_run.source
        q = source.manifold.from_sphere(np.array([[0.0, 0.6, -0.8]]))
        rate = source.metric_rate(q, 0.02)
        g = source.metric(q, 0.02)
        factor = rate[0, 0, 0] / g[0, 0, 0]
        np.testing.assert_allclose(rate[0], factor * g[0], atol=1e-12)

    def test_curvature_positive(self, short_run):
        source = short_run.source
        q = source.manifold.from_sphere(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
        assert np.all(source.curvature(q, 0.05) > 0)
