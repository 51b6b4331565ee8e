"""
Tests for the rich result panels.
"""
from rich.console import Console

from isoflow.report.convergence import ErrorReport, ErrorRow
from isoflow.report.diagnostics import Diagnostic
from isoflow.report.display import convergence_panel, korn_panel, show, summary_panel


def _render(panel) -> str:
    console = Console(record=True, width=140)
    show(panel, console)
    return console.export_text()


class TestPanels:
    """Rendered text of each panel."""

    def test_convergence_table(self):
        rows = [
            ErrorRow(0.5, 1e-3, 2e-3, 3e-3, 1e-3, 0.0),
            ErrorRow(0.25, 1.25e-4, 2.5e-4, 3.75e-4, 1e-4, 0.0),
            ErrorRow(0.125, float("nan"), float("nan"), float("nan"), float("nan"), 0.0, failed=True, note="singular"),
        ]
        text = _render(convergence_panel(ErrorReport("ellipsoid", 3, 3, rows=rows, label="empirical order check")))
        assert "ISOFLOW CONVERGENCE" in text
        assert "k=3, k_g=3 (empirical order check)" in text
        assert "3.00" in text
        assert "failed" in text and "singular" in text

    def test_korn_ratios(self):
        text = _render(korn_panel([(0.5, 0.4), (0.25, 0.42)], 5))
        assert "KORN" in text
        assert "0.400000" in text
        assert "1.0500" in text

    def test_summary_with_diagnostics(self):
        text = _render(summary_panel("revolution", {"steps": 10, "max_lambda": 1.5e-9},
                                     [Diagnostic(3, "error", "constraint violated")]))
        assert "steps" in text and "10" in text
        assert "1.5e-09" in text
        assert "step 3" in text
        assert "constraint violated" in text
