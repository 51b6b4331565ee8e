import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..errors import ConfigError

logger = logging.getLogger(__name__)

EXPERIMENTS = ("ellipsoid", "revolution", "conformal", "ricci")
METRIC_RHS = ("regge", "exact")
DEFAULT_LEVELS = [0.7, 0.5, 0.35]
FULL_SWEEP = [0.7, 0.6, 0.5, 0.4, 0.3, 0.25]
THEORY_MIN_DEGREE = 5

DEFAULT_CONFIG = {
    "experiment": "ellipsoid",
    "k": 5,
    "k_g": 5,
    "mesh_level": None,
    "frequency": None,
    "target_h": 0.5,
    "tau": 1e-3,
    "T": 0.1,
    "sample_times": [],
    "out": "isoflow_out",
    "metric_rhs": "regge",
    "quad_degree": None,
    "vtk_subdivision": 4,
    "export_vtk": True,
    "export_csv": True,
    "export_off": False,
    "dump_matrices": False,
    "ricci_grid": 512,
    "ricci_until": None,
    "conformal_amplitude": 0.3,
    "levels": DEFAULT_LEVELS,
    "log_level": "INFO",
}


@dataclass(frozen=True)
class FlowConfig:
    experiment: str = "ellipsoid"
    k: int = 5
    k_g: int = 5
    mesh_level: Optional[int] = None
    frequency: Optional[int] = None
    target_h: float = 0.5
    tau: float = 1e-3
    T: float = 0.1
    sample_times: List[float] = field(default_factory=list)
    out: str = "isoflow_out"
    metric_rhs: str = "regge"
    quad_degree: Optional[int] = None
    vtk_subdivision: int = 4
    export_vtk: bool = True
    export_csv: bool = True
    export_off: bool = False
    dump_matrices: bool = False
    ricci_grid: int = 512
    ricci_until: Optional[float] = None
    conformal_amplitude: float = 0.3
    levels: List[float] = field(default_factory=lambda: list(DEFAULT_LEVELS))
    log_level: str = "INFO"

    @property
    def theory_regime(self) -> bool:
        """k = k_g >= 5, where the error estimate is proven."""
        return self.k == self.k_g and self.k >= THEORY_MIN_DEGREE

    @property
    def quadrature_degree(self) -> int:
        return self.quad_degree if self.quad_degree is not None else 2 * self.k + 3

    @property
    def ricci_horizon(self) -> float:
        return self.ricci_until if self.ricci_until is not None else self.T

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def validate(values: Dict[str, Any]) -> FlowConfig:
    known = {f.name for f in fields(FlowConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
    try:
        cfg = FlowConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc

    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"Unknown experiment '{cfg.experiment}', expected one of {EXPERIMENTS}")
    if cfg.metric_rhs not in METRIC_RHS:
        raise ConfigError(f"metric_rhs must be one of {METRIC_RHS}")
    if cfg.k < 1:
        raise ConfigError(f"k must be >= 1, got {cfg.k}")
    if cfg.k_g < 0:
        raise ConfigError(f"k_g must be >= 0, got {cfg.k_g}")
    if not cfg.tau > 0:
        raise ConfigError(f"tau must be positive, got {cfg.tau}")
    if cfg.T < 0:
        raise ConfigError(f"T must be non-negative, got {cfg.T}")
    bad = [t for t in cfg.sample_times if t < 0 or t > cfg.T]
    if bad:
        raise ConfigError(f"Sample times {bad} lie outside [0, {cfg.T}]")
    if cfg.mesh_level is not None and cfg.mesh_level < 0:
        raise ConfigError(f"mesh_level must be >= 0, got {cfg.mesh_level}")
    if cfg.frequency is not None and cfg.frequency < 1:
        raise ConfigError(f"frequency must be >= 1, got {cfg.frequency}")
    if not cfg.target_h > 0 or any(h <= 0 for h in cfg.levels):
        raise ConfigError("Mesh sizes must be positive")
    if cfg.vtk_subdivision < 1:
        raise ConfigError(f"vtk_subdivision must be >= 1, got {cfg.vtk_subdivision}")
    if cfg.ricci_grid < 8 or cfg.ricci_grid % 2:
        raise ConfigError(f"ricci_grid must be an even number >= 8, got {cfg.ricci_grid}")
    if cfg.ricci_until is not None and cfg.ricci_until < cfg.T:
        raise ConfigError("ricci_until must cover the embedding interval [0, T]")

    if not cfg.theory_regime:
        logger.warning(
            "k=%d, k_g=%d is outside the theory-covered regime k = k_g >= %d; orders are empirical",
            cfg.k, cfg.k_g, THEORY_MIN_DEGREE,
        )
    return cfg


class ConfigManager:
    """
    JSON experiment configuration merged over DEFAULT_CONFIG, then over
    command line overrides (None values are ignored).
    """

    def __init__(self, path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None):
        self.config_file = Path(path) if path else None
        self.overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        self.config = self.load_config()

    def load_config(self) -> Dict[str, Any]:
        config = json.loads(json.dumps(DEFAULT_CONFIG))
        if self.config_file is not None:
            if not self.config_file.exists():
                raise ConfigError(f"Config file not found: {self.config_file}")
            try:
                with open(self.config_file, "r", encoding="utf-8") as f:
                    user_cfg = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"Cannot parse {self.config_file}: {exc}") from exc
            if not isinstance(user_cfg, dict):
                raise ConfigError(f"{self.config_file} must hold a JSON object")
            config.update(user_cfg)
        config.update(self.overrides)
        return config

    def resolve(self) -> FlowConfig:
        return validate(self.config)

    def save_config(self, directory: Optional[str] = None) -> Path:
        """Write the resolved configuration as config.json (next to the outputs by default)."""
        target = Path(directory or self.config["out"])
        target.mkdir(parents=True, exist_ok=True)
        path = target / "config.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.config, f, indent=4, sort_keys=True)
        return path

    def get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def set(self, key: str, value: Any):
        self.config[key] = value
