import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np

from .errors import ConfigError, FlowAborted, IsoflowError
from .fem.forms import MetricContext, area_ratio, d_odot, mesh_metric, pointwise_inner
from .fem.lagrange import FeField, LagrangeSpace, build_lagrange_space
from .fem.refgeom import Ellipsoid, ReferenceManifold, Revolution, Sphere
from .fem.regge import ReggeSpace, build_regge_space
from .flow.ricci import (
    EXAMPLE_PROFILE,
    AxisymProfile,
    RicciTrajectory,
    conformal_sphere_source,
    ricci_axisym_run,
)
from .flow.sources import ELLIPSOID_AXES, MetricSource, ellipsoid_flow, revolution_flow
from .flow.stepper import BdfIntegrator, Trajectory
from .mesh.io import write_off, write_vtk_mesh
from .mesh.surface import (
    SurfaceMesh,
    build_geodesic_sphere,
    build_icosphere,
    frequency_for_target_h,
    mesh_on_manifold,
    mesh_size,
)
from .report.diagnostics import write_step_csv
from .report.export import export_vtk
from .utils.config import ConfigManager, FlowConfig
from .utils.state import RunState
from .utils.watcher import ConfigWatcher

logger = logging.getLogger(__name__)


@dataclass
class FlowSetup:
    config: FlowConfig
    manifold: ReferenceManifold
    mesh: SurfaceMesh
    source: MetricSource
    space: LagrangeSpace
    regge_space: ReggeSpace
    ctx: MetricContext
    integrator: BdfIntegrator
    ricci: Optional[RicciTrajectory] = None

    @property
    def h(self) -> float:
        return mesh_size(self.mesh)


def reference_manifold(experiment: str) -> ReferenceManifold:
    if experiment == "ellipsoid":
        return Ellipsoid(ELLIPSOID_AXES)
    if experiment == "ricci":
        return Revolution(EXAMPLE_PROFILE)
    return Sphere(1.0)


def build_mesh(config: FlowConfig, manifold: ReferenceManifold) -> SurfaceMesh:
    """Icosphere level, geodesic frequency or target mesh size, in that order of precedence."""
    if config.mesh_level is not None:
        sphere = build_icosphere(config.mesh_level)
    else:
        frequency = config.frequency or frequency_for_target_h(manifold, config.target_h)
        sphere = build_geodesic_sphere(frequency)
    return mesh_on_manifold(sphere, manifold)


class FlowEngine:
    def __init__(self, config: FlowConfig, config_path: Optional[str] = None,
                 overrides: Optional[Dict[str, Any]] = None):
        self.config = config
        self.config_path = config_path
        self.overrides = overrides or {}
        self.state = RunState(config=config.to_dict())
        self.watcher = ConfigWatcher()
        self.on_sample_callback: Optional[Callable[[RunState], None]] = None
        self.setup: Optional[FlowSetup] = None

    @property
    def out_dir(self) -> Path:
        return self.config.out_dir

    def _source(self, manifold: ReferenceManifold):
        cfg = self.config
        if cfg.experiment == "ellipsoid":
            return ellipsoid_flow(), None
        if cfg.experiment == "revolution":
            return revolution_flow(), None
        if cfg.experiment == "conformal":
            return conformal_sphere_source(cfg.conformal_amplitude, cfg.ricci_grid), None
        profile = AxisymProfile.from_meridian(EXAMPLE_PROFILE, cfg.ricci_grid)
        traj = ricci_axisym_run(profile, T=cfg.ricci_horizon, manifold=manifold)
        if cfg.export_csv:
            times = sorted({0.0, cfg.ricci_horizon, *cfg.sample_times})
            paths = traj.write_csv(self.out_dir / "ricci", times)
            self.state.files.extend(str(p) for p in paths)
        return traj.source, traj

    def build(self) -> FlowSetup:
        cfg = self.config
        manifold = reference_manifold(cfg.experiment)
        source, ricci = self._source(manifold)
        if cfg.T > source.interval[1]:
            raise ConfigError(f"T={cfg.T} exceeds the {source.name} interval {source.interval}")

        mesh = build_mesh(cfg, manifold)
        space = build_lagrange_space(mesh, cfg.k)
        regge_space = build_regge_space(mesh, cfg.k_g)
        ctx = MetricContext.build(mesh_metric(mesh, manifold, cfg.k_g), cfg.quadrature_degree)
        dump_dir = self.out_dir / "matrices" if cfg.dump_matrices else None
        integrator = BdfIntegrator(
            space, source, ctx, regge_space=regge_space, metric_rhs=cfg.metric_rhs, dump_dir=dump_dir
        )
        lo, hi = area_ratio(ctx, manifold)
        self.state.mesh_summary = {**mesh.summary(), "ndof": 3 * space.ndof, "area_ratio": (lo, hi)}
        logger.debug("area element ratio M_h / M in [%.6f, %.6f]", lo, hi)
        logger.info(
            "%s: %d triangles, h=%.4f, P%d velocity (%d dofs), Regge P%d (%d dofs)",
            source.name, mesh.n_triangles, mesh_size(mesh), cfg.k, 3 * space.ndof, cfg.k_g, regge_space.ndof,
        )
        self.setup = FlowSetup(cfg, manifold, mesh, source, space, regge_space, ctx, integrator, ricci)
        return self.setup

    def _point_data(self, setup: FlowSetup, r: FeField, t: float) -> dict:
        mesh = setup.mesh

        def curvature(ref):
            x = mesh.chart_points(ref).reshape(-1, 3)
            q = setup.manifold.closest_point(x)
            return np.asarray(setup.source.curvature(q, t)).reshape(mesh.n_triangles, len(ref))

        def isometry_density(ref):
            _, dr = r.evaluate(ref)
            diff = d_odot(dr, dr) - setup.integrator.target_metric(t).evaluate(None, ref)
            ginv = np.linalg.inv(setup.ctx.metric.evaluate(None, ref))
            return pointwise_inner(ginv, diff, diff)

        data = {"isometry_density": isometry_density}
        if setup.source.curvature is not None:
            data["curvature"] = curvature
        return data

    def export_sample(self, setup: FlowSetup, r: FeField, t: float, step: int):
        files = []
        if self.config.export_vtk:
            path = self.out_dir / f"{setup.source.name}_t{t:.4f}.vtk"
            export_vtk(r, path, self.config.vtk_subdivision, self._point_data(setup, r, t))
            files.append(str(path))
        self.state.add_sample(t, step, files)
        logger.info("t=%.4f exported %s", t, ", ".join(files) or "nothing")
        if self.on_sample_callback:
            self.on_sample_callback(self.state)

    def export_reference(self, setup: FlowSetup) -> list:
        files = [write_vtk_mesh(setup.mesh, self.out_dir / "reference_mesh.vtk")]
        if self.config.export_off:
            files.append(write_off(setup.mesh, self.out_dir / "reference_mesh.off"))
        self.state.files.extend(str(p) for p in files)
        return files

    def run(self) -> Trajectory:
        """
        Build and integrate to T, exporting every sample. Failures are recorded
        in the state and re-raised; aborted flows keep their partial samples.
        """
        cfg = self.config
        self.state.reset()
        self.state.started = time.time()
        try:
            setup = self.build()
            if cfg.export_off:
                self.export_reference(setup)
            try:
                traj = setup.integrator.run(cfg.tau, cfg.T, cfg.sample_times)
            except FlowAborted as exc:
                if exc.trajectory is not None:
                    self._finish(setup, exc.trajectory)
                raise
            self._finish(setup, traj)
            return traj
        except IsoflowError as exc:
            logger.error("run failed: %s", exc)
            self.state.fail(str(exc))
            if self.on_sample_callback:
                self.on_sample_callback(self.state)
            raise
        finally:
            self.state.finished = time.time()

    def _finish(self, setup: FlowSetup, traj: Trajectory):
        for sample in traj.samples:
            self.export_sample(setup, sample.r, sample.t, sample.step)
        self.state.update_records(traj.records)
        if self.config.export_csv:
            path = write_step_csv(traj.records, self.out_dir / f"{setup.source.name}_steps.csv")
            self.state.files.append(str(path))
        self.state.summary = {**traj.summary(), "h": setup.h, "ndof": 3 * setup.space.ndof}

    # --- watch mode ---------------------------------------------------------

    def start(self):
        if not self.config_path:
            raise ConfigError("Watching needs a config file")
        self.refresh()
        self.watcher.start_watching(self.config_path, self._on_config_saved)

    def stop(self):
        self.watcher.stop_watching()

    def _on_config_saved(self, path: str):
        try:
            self.config = ConfigManager(path, self.overrides).resolve()
        except IsoflowError as exc:
            logger.error("config reload failed: %s", exc)
            self.state.fail(str(exc))
            return
        self.state.config = self.config.to_dict()
        self.refresh()

    def refresh(self):
        try:
            self.run()
        except IsoflowError:
            pass
