"""
Tests for the BDF integrator: start-up, step bookkeeping, sampling and
failure handling.
"""
import numpy as np
import pytest

from isoflow.errors import CurvatureNegative, FlowAborted, InvalidStep, OutOfInterval
from isoflow.fem.forms import MetricContext, l2_norm, mesh_metric
from isoflow.fem.lagrange import build_lagrange_space, interpolate, lift
from isoflow.fem.refgeom import Sphere
from isoflow.fem.regge import build_regge_space
from isoflow.flow.sources import MetricSource, ellipsoid_flow
from isoflow.flow.stepper import BDF_COEFFICIENTS, EXTRAPOLATION, BdfIntegrator
from isoflow.mesh.surface import build_icosphere, mesh_on_manifold


def _static_source(interval=(0.0, 1.0), rate=None):
    sphere = Sphere(1.0)
    return MetricSource(
        name="static",
        manifold=sphere,
        metric=lambda q, t: sphere.induced_metric(q),
        rate=rate if rate is not None else (lambda q, t: np.zeros((len(q), 3, 3))),
        initial_embedding=lambda q: np.array(q, dtype=float),
        interval=interval,
    )


def _integrator(source, level=0, k=2, k_g=None, **kwargs):
    mesh = mesh_on_manifold(build_icosphere(level), source.manifold)
    space = build_lagrange_space(mesh, k)
    ctx = MetricContext.build(mesh_metric(mesh, source.manifold, k if k_g is None else k_g), 2 * k + 3)
    regge = build_regge_space(mesh, k_g) if k_g is not None else None
    if regge is None:
        kwargs.setdefault("metric_rhs", "exact")
    return BdfIntegrator(space, source, ctx, regge_space=regge, **kwargs)


class TestCoefficients:
    """BDF and extrapolation weights."""

    def test_bdf_weights_annihilate_constants(self):
        for row in BDF_COEFFICIENTS:
            assert sum(row) == pytest.approx(0.0, abs=1e-15)

    def test_bdf_weights_differentiate_linears(self):
        # sum_j a_j (n - j) = 1 for r(t) = t
        for row in BDF_COEFFICIENTS:
            assert sum(-j * a for j, a in enumerate(row)) == pytest.approx(1.0)

    def test_extrapolation_exact_for_polynomials(self):
        for order, row in enumerate(EXTRAPOLATION, start=1):
            for p in range(order):
                value = sum(c * (-(j + 1)) ** p for j, c in enumerate(row))
                assert value == pytest.approx(0.0 ** p)


class TestStationarySource:
    """A metric with zero rate leaves the embedding untouched."""

    def test_embedding_is_unchanged(self):
        integrator = _integrator(_static_source(), k_g=2, metric_rhs="regge")
        state = integrator.initialize(0.01)
        assert [rec.step for rec in state.records] == [1, 2]
        r0 = integrator.initial_field()
        assert np.abs(state.current.flat - r0.flat).max() <= 1e-12

    def test_bdf3_keeps_stationary(self):
        integrator = _integrator(_static_source())
        state = integrator.bdf3_step(integrator.initialize(0.01))
        assert state.n == 3
        assert np.abs(state.current.flat - state.history[-1].flat).max() <= 1e-12

    def test_multiplier_vanishes(self):
        integrator = _integrator(_static_source())
        trajectory = integrator.run(0.01, 0.03)
        assert trajectory.max_lambda == 0.0


class TestStepping:
    """Step sizes, history and sampling."""

    @pytest.mark.parametrize("tau", [0.0, -0.1, float("nan")])
    def test_rejects_bad_step(self, tau):
        integrator = _integrator(_static_source())
        with pytest.raises(InvalidStep):
            integrator.initialize(tau)
        with pytest.raises(InvalidStep):
            integrator.run(tau, 0.1)

    def test_rejects_final_time_off_grid(self):
        integrator = _integrator(_static_source())
        with pytest.raises(InvalidStep):
            integrator.run(0.03, 0.1)

    def test_final_time_outside_interval(self):
        integrator = _integrator(_static_source(interval=(0.0, 0.05)))
        with pytest.raises(OutOfInterval):
            integrator.run(0.01, 0.1)

    def test_zero_final_time_gives_initial_sample(self):
        integrator = _integrator(_static_source())
        trajectory = integrator.run(0.01, 0.0)
        assert len(trajectory.samples) == 1
        assert trajectory.final.step == 0
        assert trajectory.records == []

    def test_bdf3_needs_history(self):
        integrator = _integrator(_static_source())
        state = integrator.initialize(0.01, until=0.01)
        assert len(state.history) == 2
        with pytest.raises(InvalidStep):
            integrator.bdf3_step(state)

    def test_history_is_capped(self):
        integrator = _integrator(_static_source())
        state = integrator.initialize(0.01)
        for _ in range(3):
            state = integrator.advance(state)
        assert len(state.history) == 3
        assert state.order == 3
        assert state.t == pytest.approx(0.05)

    def test_samples_and_callback(self):
        integrator = _integrator(_static_source())
        seen = []
        integrator.on_step = lambda state, record: seen.append(record.step)
        trajectory = integrator.run(0.01, 0.05, sample_times=[0.02])
        assert [s.step for s in trajectory.samples] == [0, 2, 5]
        assert seen == [1, 2, 3, 4, 5]
        assert trajectory.at(0.021).t == pytest.approx(0.02)
        assert trajectory.summary()["steps"] == 5

    def test_metric_rhs_validation(self):
        source = _static_source()
        with pytest.raises(ValueError):
            _integrator(source, metric_rhs="bogus")
        with pytest.raises(ValueError):
            _integrator(source, metric_rhs="regge")


class TestFailure:
    """Errors inside a step abort the run with the partial trajectory."""

    def test_partial_trajectory_is_kept(self):
        def rate(q, t):
            if t > 0.025:
                raise CurvatureNegative(f"curvature lost at t={t}")
            return np.zeros((len(q), 3, 3))

        integrator = _integrator(_static_source(rate=rate), track_isometry=False)
        with pytest.raises(FlowAborted) as info:
            integrator.run(0.01, 0.05, sample_times=[0.01])
        partial = info.value.trajectory
        assert len(partial.records) == 2
        assert [s.step for s in partial.samples] == [0, 1]
        assert isinstance(info.value.cause, CurvatureNegative)


class TestEllipsoidFlow:
    """Short run of the ellipsoid experiment against the exact embedding."""

    def test_tracks_exact_embedding(self):
        source = ellipsoid_flow()
        integrator = _integrator(source, level=1, k=2, k_g=2, metric_rhs="regge")
        trajectory = integrator.run(0.01, 0.05)
        exact = interpolate(integrator.space, lift(source.manifold, lambda q: source.embedding(q, 0.05)), 3)
        err = l2_norm(trajectory.final.r - exact, integrator.ctx) / l2_norm(exact, integrator.ctx)
        assert err < 2e-2
        for record in trajectory.records:
            assert record.constraint_res <= 1e-10
            assert np.isfinite(record.isometry_res)
