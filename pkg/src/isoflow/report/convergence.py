"""
Error tables of convergence studies with experimental orders of convergence.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

from ..errors import ExportError

CONVERGENCE_FIELDS = [
    "h", "l2_error", "d_error", "graph_error", "isometry_res", "max_lambda",
    "eoc_l2", "eoc_d", "eoc_graph",
]
EOC_SOURCES = {"eoc_l2": "l2_error", "eoc_d": "d_error", "eoc_graph": "graph_error"}


class ErrorRow(NamedTuple):
    h: float
    l2_error: float
    d_error: float
    graph_error: float
    isometry_res: float
    max_lambda: float
    failed: bool = False
    note: str = ""


def eoc(e1: float, e2: float, h1: float, h2: float) -> Optional[float]:
    """log(e1 / e2) / log(h1 / h2); None when undefined."""
    if min(e1, e2) <= 0 or h1 == h2 or not all(map(math.isfinite, (e1, e2))):
        return None
    return math.log(e1 / e2) / math.log(h1 / h2)


@dataclass
class ErrorReport:
    experiment: str
    degree: int
    metric_degree: int
    rows: list[ErrorRow] = field(default_factory=list)
    label: str = ""

    @property
    def failed(self) -> bool:
        """Partial report: at least one mesh did not finish."""
        return any(r.failed for r in self.rows)

    @property
    def completed(self) -> list[ErrorRow]:
        return [r for r in self.rows if not r.failed]

    def orders(self, column: str = "graph_error") -> list[Optional[float]]:
        """EOC between consecutive completed rows, None for the first."""
        rows = self.completed
        out: list[Optional[float]] = [None]
        for prev, cur in zip(rows, rows[1:]):
            out.append(eoc(getattr(prev, column), getattr(cur, column), prev.h, cur.h))
        return out

    def finest_order(self, column: str = "graph_error") -> Optional[float]:
        orders = self.orders(column)
        return orders[-1] if len(orders) > 1 else None

    def table(self) -> list[dict]:
        rows = self.completed
        cols = {name: self.orders(src) for name, src in EOC_SOURCES.items()}
        out = []
        for i, row in enumerate(rows):
            rec = {k: getattr(row, k) for k in CONVERGENCE_FIELDS[:6]}
            for name in EOC_SOURCES:
                rec[name] = cols[name][i]
            out.append(rec)
        return out

    def to_csv(self, path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="", encoding="utf-8") as f:
                writer = csv.DictWriter(f, fieldnames=CONVERGENCE_FIELDS)
                writer.writeheader()
                for rec in self.table():
                    writer.writerow({k: "" if v is None else repr(float(v)) for k, v in rec.items()})
        except OSError as exc:
            raise ExportError(f"Cannot write {path}: {exc}") from exc
        return path
