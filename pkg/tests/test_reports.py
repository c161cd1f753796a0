"""Tests for the output writers and the error handler."""

import math

import numpy as np
import pytest

from actionlab.dynamics import simulate
from actionlab.error_handling import (DivergenceError, ErrorCategory, ErrorHandler, FileSystemError, LabError,
                                      ParameterError, safe_call)
from actionlab.reports import (format_measured, format_value, summary_rows, trajectory_columns,
                               write_summary_csv, write_trajectory_csv)
from actionlab.verify import TheoremReport, Verdict


@pytest.mark.parametrize("value, expected", [
    (True, "true"),
    (np.bool_(True), "true"),
    (np.bool_(False), "false"),
    (None, "none"),
    (3, "3"),
    (np.int64(4), "4"),
    (0.1234567891, "0.123457"),
    (math.inf, "inf"),
    ([1.0, 2.5], "[1 2.5]"),
    ("text", "text"),
])
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_summary_rows_follow_report_order():
    reports = [TheoremReport("convergence", "b", Verdict.PASS, measured={"tail_spread": 0.5}),
               TheoremReport("corollary", "a", Verdict.FAIL, message="dU exceeds E")]
    rows = summary_rows(reports)
    assert rows[0] == ("b", "convergence", "theorem:convergence", "pass", "tail_spread=0.5", "")
    assert rows[1][3] == "fail"
    assert format_measured({"x": 1, "y": [0.5]}) == "x=1; y=[0.5]"


def test_trajectory_csv_layout(tmp_path, scalar_agent):
    record = simulate(scalar_agent(theta=1.0), T=1.0, h=0.01, sample_stride=50)
    path = write_trajectory_csv(str(tmp_path / "nested" / "run.csv"), record)
    lines = open(path).read().splitlines()
    assert lines[0].split(",") == trajectory_columns(1)
    assert len(lines) == 1 + len(record)
    first = [float(v) for v in lines[1].split(",")]
    assert first[:3] == [0.0, 1.0, 0.0]
    assert first[-1] == 0.0


def test_summary_csv_into_unwritable_location(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(FileSystemError):
        write_summary_csv(str(blocker / "summary.csv"), [])


def test_error_handler_standardizes_and_counts():
    handler = ErrorHandler()
    error = handler.handle_error(ValueError("bad shape"), "loading")
    assert isinstance(error, ParameterError)
    assert "loading" in error.message
    overflow = handler.handle_error(FloatingPointError("overflow encountered"), "integrating")
    assert isinstance(overflow, DivergenceError)
    other = handler.handle_error(RuntimeError("boom"), "somewhere")
    assert other.category == ErrorCategory.SYSTEM
    stats = handler.get_error_stats()
    assert stats["total_errors"] == 3
    assert stats["error_breakdown"]["parameter:ValueError"] == 1


def test_error_handler_reraises_lab_errors():
    handler = ErrorHandler()
    with pytest.raises(LabError):
        handler.handle_error(ParameterError("q = -1/2"), "check", reraise=True)
    assert handler.error_counts == {"parameter:ParameterError": 1}


def test_safe_call_returns_fallback():
    assert safe_call(lambda: 1 / 0, fallback="none", context="division") == "none"
    assert safe_call(lambda x: x + 1, 1) == 2
