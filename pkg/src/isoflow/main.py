import argparse
import sys
import time

from .engine import FlowEngine, build_mesh, reference_manifold
from .errors import IsoflowError
from .fem.lagrange import build_lagrange_space, interpolate, lift
from .mesh.io import write_off, write_vtk_mesh
from .report.diagnostics import check_records
from .report.display import convergence_panel, korn_panel, show, summary_panel
from .report.export import export_vtk
from .studies import run_convergence, run_embedding, run_korn
from .utils.config import ConfigManager, FlowConfig
from .utils.log import setup_logging

VERBS = ("converge", "embed", "ricci", "export", "korn")


def _build_parser() -> argparse.ArgumentParser:
    """Build and return the CLI argument parser."""
    parser = argparse.ArgumentParser(description="isoflow: isometric embedding flows with surface finite elements")
    parser.add_argument("verb", choices=VERBS, help="What to run")
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--experiment", choices=("ellipsoid", "revolution", "conformal", "ricci"))
    parser.add_argument("--mesh-level", type=int, help="Icosphere refinement level")
    parser.add_argument("--frequency", type=int, help="Geodesic sphere frequency")
    parser.add_argument("--degree", type=int, help="Lagrange degree k (also sets k_g unless given)")
    parser.add_argument("--metric-degree", type=int, help="Regge degree k_g")
    parser.add_argument("--tau", type=float, help="Time step size")
    parser.add_argument("--until", type=float, help="Final time T")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--dump-matrices", action="store_true", default=None, help="Write A, B, f as MatrixMarket")
    parser.add_argument("--watch", action="store_true", help="Re-run whenever the config file is saved")
    parser.add_argument("--full-sweep", action="store_true", help="Use the six-mesh convergence sweep")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    overrides = {
        "experiment": args.experiment,
        "mesh_level": args.mesh_level,
        "frequency": args.frequency,
        "k": args.degree,
        "k_g": args.metric_degree if args.metric_degree is not None else args.degree,
        "tau": args.tau,
        "T": args.until,
        "out": args.out,
        "dump_matrices": args.dump_matrices,
        "log_level": args.log_level,
    }
    if args.verb == "ricci":
        overrides["experiment"] = "ricci"
    return overrides


def _export_reference(cfg: FlowConfig):
    manifold = reference_manifold(cfg.experiment)
    mesh = build_mesh(cfg, manifold)
    out = cfg.out_dir
    write_off(mesh, out / "reference_mesh.off")
    write_vtk_mesh(mesh, out / "reference_mesh.vtk")
    space = build_lagrange_space(mesh, cfg.k)
    r0 = interpolate(space, lift(manifold, lambda q: q), 3)
    export_vtk(r0, out / "reference_embedding.vtk", cfg.vtk_subdivision)
    print(f"Wrote reference mesh ({mesh.n_triangles} triangles) to {out}")


def _embed(cfg: FlowConfig, args: argparse.Namespace, overrides: dict):
    if args.watch:
        engine = FlowEngine(cfg, config_path=args.config, overrides=overrides)
        engine.start()
        try:
            while True:
                time.sleep(1.0)
        finally:
            engine.stop()
        return
    engine = run_embedding(cfg)
    show(summary_panel(f"{cfg.experiment} to T={cfg.T}", engine.state.summary, check_records(engine.state.records)))


def run():
    parser = _build_parser()
    args = parser.parse_args()

    if args.watch and not args.config:
        print("Error: --watch needs --config.")
        sys.exit(1)

    try:
        overrides = _overrides(args)
        manager = ConfigManager(args.config, overrides)
        cfg = manager.resolve()
        setup_logging(cfg.log_level, str(cfg.out_dir / "isoflow.log"))
        manager.save_config()

        if args.verb == "converge":
            report = run_convergence(cfg, full_sweep=args.full_sweep)
            show(convergence_panel(report))
            if report.failed:
                sys.exit(1)
        elif args.verb in ("embed", "ricci"):
            _embed(cfg, args, overrides)
        elif args.verb == "export":
            _export_reference(cfg)
        elif args.verb == "korn":
            level = cfg.mesh_level or 0
            show(korn_panel(run_korn(cfg.k, range(level, level + 3)), cfg.k))
    except IsoflowError as e:
        print(f"Error: {e}")
        sys.exit(1)
    except KeyboardInterrupt:
        pass
    except Exception as e:
        print(f"Fatal Error: {e}")
        sys.exit(1)


if __name__ == "__main__":
    run()
