from typing import Iterable, Optional, Sequence

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from .convergence import ErrorReport
from .diagnostics import Diagnostic

# Theme Colors (Mosaic)
C_BG = "#EBEEEE"
C_TEXT = "#191A1A"
C_ACCENT1 = "#45d3ee"  # Cyan
C_ACCENT2 = "#9FBFC5"  # Muted Blue
C_ACCENT3 = "#94bfc1"  # Teal
C_ACCENT4 = "#fecd91"  # Orange
C_ERROR = "#d9534f"


def create_gradient_header(title: str) -> Text:
    text = Text(f" {title} ", style="bold italic")
    start_rgb = (69, 211, 238)
    end_rgb = (159, 191, 197)
    for i in range(len(text)):
        ratio = i / len(text)
        color = "#" + "".join(f"{int(a + (b - a) * ratio):02x}" for a, b in zip(start_rgb, end_rgb))
        text.stylize(color, i, i + 1)
    return text


def _fmt(value: Optional[float], spec: str = ".3e") -> str:
    return "-" if value is None else format(value, spec)


def _table(title: str) -> Table:
    return Table(
        title=title,
        title_style=f"bold {C_ACCENT3}",
        header_style=f"bold {C_ACCENT1}",
        box=None,
        row_styles=["", "on #f5f7f7"],
        expand=True,
    )


def _panel(body, header: str) -> Panel:
    return Panel(
        body,
        title=create_gradient_header(header),
        title_align="left",
        border_style=C_ACCENT2,
        padding=(1, 2),
        style=f"{C_TEXT} on {C_BG}",
    )


def convergence_panel(report: ErrorReport) -> Panel:
    title = f"{report.experiment}: k={report.degree}, k_g={report.metric_degree}"
    if report.label:
        title += f" ({report.label})"
    table = _table(title)
    table.add_column("h", style=f"bold {C_ACCENT1}", no_wrap=True)
    for name in ("L2", "D", "graph", "isometry", "max |lambda|"):
        table.add_column(name, style=C_TEXT)
    table.add_column("EOC graph", style=f"bold {C_ACCENT4}")

    orders = report.orders("graph_error")
    for row, order in zip(report.completed, orders):
        table.add_row(
            f"{row.h:.4f}", _fmt(row.l2_error), _fmt(row.d_error), _fmt(row.graph_error),
            _fmt(row.isometry_res), _fmt(row.max_lambda), _fmt(order, ".2f"),
        )
    for row in report.rows:
        if row.failed:
            table.add_row(f"{row.h:.4f}", f"[{C_ERROR}]failed: {row.note}[/]", "", "", "", "", "")
    return _panel(table, "ISOFLOW CONVERGENCE")


def korn_panel(rows: Sequence[tuple[float, float]], degree: int) -> Panel:
    table = _table(f"Discrete Korn constants, k=k_g={degree}")
    table.add_column("h", style=f"bold {C_ACCENT1}", no_wrap=True)
    table.add_column("C_K", style=C_TEXT)
    table.add_column("ratio to previous", style=C_ACCENT3)
    previous = None
    for h, c in rows:
        table.add_row(f"{h:.4f}", f"{c:.6f}", "-" if previous is None else f"{c / previous:.4f}")
        previous = c
    return _panel(table, "ISOFLOW KORN CHECK")


def summary_panel(title: str, summary: dict, diagnostics: Iterable[Diagnostic] = ()) -> Panel:
    table = _table(title)
    table.add_column("Quantity", style=f"bold {C_ACCENT1}", no_wrap=True)
    table.add_column("Value", style=C_TEXT)
    for key, value in summary.items():
        text = f"{value:.6g}" if isinstance(value, float) else str(value)
        table.add_row(key, text)
    for d in diagnostics:
        color = C_ERROR if d.severity == "error" else C_ACCENT4
        table.add_row(f"[{color}]step {d.step}[/]", f"[{color}]{d.severity}: {d.message}[/]")
    return _panel(table, "ISOFLOW RUN")


def show(panel: Panel, console: Optional[Console] = None):
    console = console or Console()
    console.print(panel)
