import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List

from ..errors import ExportError
from ..flow.stepper import StepRecord

STEP_FIELDS = ["step", "t", "lambda_norm", "constraint_res", "isometry_res", "wall_ms"]

LAMBDA_TOL = 1e-6
CONSTRAINT_TOL = 1e-10


@dataclass
class Diagnostic:
    step: int
    severity: str  # 'error' or 'warning'
    message: str


def write_step_csv(records: Iterable[StepRecord], path) -> Path:
    """Per-step diagnostics, one row per accepted step."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=STEP_FIELDS)
            writer.writeheader()
            for rec in records:
                row = rec._asdict()
                writer.writerow({k: repr(row[k]) if isinstance(row[k], float) else row[k] for k in STEP_FIELDS})
    except OSError as exc:
        raise ExportError(f"Cannot write {path}: {exc}") from exc
    return path


def read_step_csv(path) -> List[StepRecord]:
    records = []
    with open(path, "r", newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            records.append(StepRecord(
                step=int(row["step"]),
                t=float(row["t"]),
                lambda_norm=float(row["lambda_norm"]),
                constraint_res=float(row["constraint_res"]),
                isometry_res=float(row["isometry_res"]),
                wall_ms=float(row["wall_ms"]),
            ))
    return records


def check_records(records: Iterable[StepRecord]) -> List[Diagnostic]:
    """
    Flags steps whose multiplier or constraint residual leave the expected range.
    The multiplier check uses the relative size |B^T lambda| / |f|.
    """
    found = []
    for rec in records:
        if rec.lambda_relative > LAMBDA_TOL:
            found.append(Diagnostic(rec.step, "warning", f"multiplier {rec.lambda_relative:.2e} of the right-hand side"))
        if rec.constraint_res > CONSTRAINT_TOL:
            found.append(Diagnostic(rec.step, "error", f"rigid motion constraint violated by {rec.constraint_res:.2e}"))
    return found
