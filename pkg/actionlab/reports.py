"""
Output writers: trajectory and transition CSVs, the suite summary and the
plain-text report.
"""

import csv
import json
import logging
import math
import os
from typing import Any, Iterable, List, Sequence

import numpy as np

from .dynamics import TrajectoryRecord
from .error_handling import FileSystemError
from .stability import TransitionEnvelope

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("scenario", "check", "anchor", "verdict", "measured", "message")


def trajectory_columns(weight_dim: int) -> List[str]:
    return (["t"] + [f"w_{i}" for i in range(1, weight_dim + 1)]
            + [f"wdot_{i}" for i in range(1, weight_dim + 1)]
            + ["V", "K", "U", "Z_cum", "E_cum", "residual"])


def _ensure_parent(path: str) -> None:
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    except OSError as e:
        raise FileSystemError(f"cannot create output directory for {path}: {e}", cause=e)


def write_trajectory_csv(path: str, record: TrajectoryRecord) -> str:
    """Columns t, w_1..w_m, wdot_1..wdot_m, V, K, U, Z_cum, E_cum, residual."""
    _ensure_parent(path)
    table = np.column_stack([record.times, record.w, record.wdot, record.V, record.K, record.U,
                             record.Z, record.E, record.residual])
    try:
        np.savetxt(path, table, fmt="%.17g", delimiter=",",
                   header=",".join(trajectory_columns(record.w.shape[1])), comments="")
    except OSError as e:
        raise FileSystemError(f"cannot write trajectory {path}: {e}", cause=e)
    logger.info(f"Trajectory written to {path} ({len(record)} samples)")
    return path


def write_transition_csv(path: str, transition: TransitionEnvelope, decay_rate: float,
                         gamma_hat: float) -> str:
    """Columns t, phi_norm, envelope."""
    _ensure_parent(path)
    envelope = gamma_hat * np.exp(-decay_rate * (transition.times - transition.t0))
    table = np.column_stack([transition.times, transition.norms, envelope])
    try:
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header="t,phi_norm,envelope", comments="")
    except OSError as e:
        raise FileSystemError(f"cannot write transition table {path}: {e}", cause=e)
    return path


def format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return str(value) if math.isinf(value) or math.isnan(value) else f"{value:.6g}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + " ".join(format_value(v) for v in value) + "]"
    return str(value)


def format_measured(measured: dict) -> str:
    return "; ".join(f"{key}={format_value(value)}" for key, value in measured.items())


def summary_rows(reports: Iterable) -> List[Sequence[str]]:
    return [(r.scenario, r.theorem, r.anchor, r.verdict.value, format_measured(r.measured), r.message)
            for r in reports]


def write_summary_csv(path: str, reports: Sequence) -> str:
    """One row per check, in the order given (the runner sorts by scenario)."""
    _ensure_parent(path)
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(SUMMARY_COLUMNS)
            writer.writerows(summary_rows(reports))
    except OSError as e:
        raise FileSystemError(f"cannot write summary {path}: {e}", cause=e)
    logger.info(f"Summary written to {path} ({len(reports)} rows)")
    return path


def write_text_report(path: str, suite_name: str, reports: Sequence, outputs: dict) -> str:
    """Human-readable report grouped by scenario."""
    _ensure_parent(path)
    lines = [f"Suite: {suite_name}", ""]
    scenarios = []
    for r in reports:
        if r.scenario not in scenarios:
            scenarios.append(r.scenario)
    for name in scenarios:
        lines.append(f"[{name}]")
        for file_path in outputs.get(name, []):
            lines.append(f"  output: {os.path.basename(file_path)}")
        for r in (r for r in reports if r.scenario == name):
            lines.append(f"  {r.theorem:<22} {r.verdict.value.upper():<15} {r.anchor}")
            if r.message:
                lines.append(f"      {r.message}")
            if r.parameters:
                lines.append(f"      parameters: {json.dumps(r.parameters, sort_keys=True, default=format_value)}")
        lines.append("")
    counts = {}
    for r in reports:
        counts[r.verdict.value] = counts.get(r.verdict.value, 0) + 1
    lines.append("Totals: " + ", ".join(f"{k}={counts[k]}" for k in sorted(counts)))
    try:
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise FileSystemError(f"cannot write report {path}: {e}", cause=e)
    return path
