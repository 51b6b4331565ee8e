"""
Unit tests for per-step diagnostics: CSV output and range checks.
"""
import math

import pytest

from isoflow.errors import ExportError
from isoflow.flow.stepper import StepRecord
from isoflow.report.diagnostics import STEP_FIELDS, check_records, read_step_csv, write_step_csv


def _record(step, lam=1e-12, cons=1e-14, iso=2e-3, rel=1e-10):
    return StepRecord(
        step=step, t=1e-3 * step, lambda_norm=lam, constraint_res=cons,
        isometry_res=iso, wall_ms=3.5, lambda_relative=rel,
    )


class TestStepCsv:
    """Golden header and exact round trip."""

    def test_header(self, tmp_path):
        path = write_step_csv([_record(1)], tmp_path / "steps.csv")
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert header == "step,t,lambda_norm,constraint_res,isometry_res,wall_ms"
        assert header.split(",") == STEP_FIELDS

    def test_values_read_back(self, tmp_path):
        records = [_record(i) for i in (1, 2, 3)]
        back = read_step_csv(write_step_csv(records, tmp_path / "steps.csv"))
        assert [r.step for r in back] == [1, 2, 3]
        assert [r.t for r in back] == [r.t for r in records]
        assert back[2].isometry_res == records[2].isometry_res

    def test_untracked_isometry(self, tmp_path):
        back = read_step_csv(write_step_csv([_record(1, iso=float("nan"))], tmp_path / "steps.csv"))
        assert math.isnan(back[0].isometry_res)

    def test_empty_run(self, tmp_path):
        path = write_step_csv([], tmp_path / "nested" / "steps.csv")
        assert path.read_text(encoding="utf-8").strip() == ",".join(STEP_FIELDS)

    def test_unwritable_target(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(ExportError):
            write_step_csv([_record(1)], blocker / "steps.csv")


class TestCheckRecords:
    """Multiplier and constraint thresholds."""

    def test_clean_run(self):
        assert check_records([_record(1), _record(2)]) == []

    def test_large_multiplier_warns(self):
        found = check_records([_record(1), _record(2, rel=1e-4)])
        assert len(found) == 1
        assert found[0].step == 2
        assert found[0].severity == "warning"

    def test_constraint_violation_is_error(self):
        found = check_records([_record(4, cons=1e-6)])
        assert [d.severity for d in found] == ["error"]
        assert "constraint" in found[0].message
