"""
Batch studies: spatial convergence against the exact embedding, discrete
Korn constants over refinements and Regge interpolation orders.
"""
from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .engine import FlowEngine
from .errors import ConfigError, FlowAborted
from .fem.forms import MetricContext, d_norm, graph_norm, inner_tensor, l2_norm, mesh_metric
from .fem.lagrange import build_lagrange_space, interpolate, lift
from .fem.refgeom import ReferenceManifold, Sphere, pullback_metric
from .fem.regge import build_regge_space, regge_interpolate
from .flow.system import korn_constant
from .mesh.surface import build_geodesic_sphere, build_icosphere, mesh_on_manifold, mesh_size
from .report.convergence import ErrorReport, ErrorRow
from .report.diagnostics import write_step_csv
from .utils.config import FULL_SWEEP, FlowConfig

logger = logging.getLogger(__name__)


def run_convergence(
    cfg: FlowConfig, mesh_list: Optional[Sequence[float]] = None, full_sweep: bool = False
) -> ErrorReport:
    """
    One flow per target mesh size to T, errors against the interpolated exact
    embedding I_h r(T). A mesh whose flow aborts yields a failed row.
    """
    targets = list(FULL_SWEEP if full_sweep else (mesh_list or cfg.levels))
    report = ErrorReport(
        experiment=cfg.experiment,
        degree=cfg.k,
        metric_degree=cfg.k_g,
        label="" if cfg.theory_regime else "empirical order check",
    )

    for target in targets:
        run_cfg = replace(cfg, target_h=float(target), mesh_level=None, frequency=None, export_vtk=False)
        engine = FlowEngine(run_cfg)
        setup = engine.build()
        source = setup.source
        if source.embedding is None:
            raise ConfigError(f"Experiment '{cfg.experiment}' has no exact embedding to compare with")
        h = setup.h
        try:
            traj = setup.integrator.run(cfg.tau, cfg.T, ())
        except FlowAborted as exc:
            logger.error("h=%.4f aborted: %s", h, exc)
            nan = float("nan")
            report.rows.append(ErrorRow(h, nan, nan, nan, nan, nan, failed=True, note=str(exc)))
            continue

        r_star = interpolate(setup.space, lift(setup.manifold, lambda q: source.embedding(q, cfg.T)), 3)
        err = traj.final.r - r_star
        row = ErrorRow(
            h=h,
            l2_error=l2_norm(err, setup.ctx),
            d_error=d_norm(err, r_star, setup.ctx),
            graph_error=graph_norm(err, r_star, setup.ctx),
            isometry_res=traj.records[-1].isometry_res if traj.records else float("nan"),
            max_lambda=traj.max_lambda,
        )
        report.rows.append(row)
        logger.info("h=%.4f graph error %.4e (max |lambda| %.2e)", h, row.graph_error, row.max_lambda)
        if cfg.export_csv:
            write_step_csv(traj.records, cfg.out_dir / f"steps_h{h:.4f}.csv")

    if cfg.export_csv:
        report.to_csv(cfg.out_dir / "convergence.csv")
    return report


def run_embedding(cfg: FlowConfig) -> FlowEngine:
    """Integrate one experiment and export its samples; returns the engine with its state."""
    engine = FlowEngine(cfg)
    engine.run()
    return engine


def sphere_korn_constant(level: int, degree: int) -> tuple[float, float]:
    """(h, C_K) for the interpolated identity embedding of the unit sphere."""
    sphere = Sphere(1.0)
    mesh = mesh_on_manifold(build_icosphere(level), sphere)
    space = build_lagrange_space(mesh, degree)
    ctx = MetricContext.build(mesh_metric(mesh, sphere, degree), 2 * degree + 3)
    r = interpolate(space, lift(sphere, lambda q: q), 3)
    return mesh_size(mesh), korn_constant(space, r, ctx)


def run_korn(degree: int = 3, levels: Sequence[int] = (0, 1, 2)) -> list[tuple[float, float]]:
    rows = []
    for level in levels:
        h, c = sphere_korn_constant(level, degree)
        logger.info("Korn constant level %d (h=%.4f): %.6f", level, h, c)
        rows.append((h, c))
    return rows


def regge_interpolation_error(manifold: ReferenceManifold, mesh, k_g: int, quad_degree: int = 0) -> float:
    """||R_h(a*g) - a*g||_{L2(M_h)} for the induced metric of `manifold`."""
    ctx = MetricContext.build(mesh_metric(mesh, manifold, k_g + 2), quad_degree or 2 * k_g + 6)
    sigma = pullback_metric(manifold, mesh, lambda q, t: manifold.induced_metric(q))
    interp = regge_interpolate(build_regge_space(mesh, k_g), sigma)
    diff = ctx.tensor_at_quadrature(interp) - ctx.tensor_at_quadrature(sigma)
    return float(np.sqrt(max(inner_tensor(diff, diff, ctx), 0.0)))


def regge_study(manifold: ReferenceManifold, k_g: int, frequencies: Sequence[int]) -> ErrorReport:
    """Regge interpolation errors on geodesic meshes; the graph column holds the tensor error."""
    report = ErrorReport(experiment=f"regge-{manifold!r}", degree=k_g, metric_degree=k_g)
    for n in frequencies:
        mesh = mesh_on_manifold(build_geodesic_sphere(n), manifold)
        e = regge_interpolation_error(manifold, mesh, k_g)
        report.rows.append(ErrorRow(mesh_size(mesh), e, 0.0, e, 0.0, 0.0))
    return report
