"""
Files written for a scenario run.

A run directory holds one CSV trace per run, a combined ``report.json`` and an
``overlay.svg`` chart. Emitting the same results twice produces byte-identical
files.
"""

from __future__ import annotations

import csv
import io
import json
import logging

from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib
import numpy as np

from matplotlib.figure import Figure

from ipdtsim.base import ConfigurationError
from ipdtsim.dynamics import TRACE_COLUMNS, SimTrace


if TYPE_CHECKING:
    from ipdtsim.scenarios import ScenarioResult


logger = logging.getLogger(__name__)

REPORT_NAME = "report.json"
PLOT_NAME = "overlay.svg"
SVG_RC = {"svg.hashsalt": "ipdtsim", "svg.fonttype": "path", "path.simplify": False}


class OutputError(OSError):
    """A run directory or one of its files could not be written."""

    pass


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as err:
        raise OutputError(f"Cannot write '{path}': {err.strerror or err}") from err


def trace_to_csv(trace: SimTrace) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(trace.columns)
    columns = [trace.column(name) for name in trace.columns]
    for row in zip(*columns):
        writer.writerow([repr(float(value)) for value in row])
    return buffer.getvalue()


def write_trace_csv(trace: SimTrace, path: str | Path) -> Path:
    path = Path(path)
    _write(path, trace_to_csv(trace))
    return path


def read_trace_csv(path: str | Path) -> SimTrace:
    """Parse a trace written by :func:`write_trace_csv`."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fp:
            rows = list(csv.reader(fp))
    except OSError as err:
        raise OutputError(f"Cannot read '{path}': {err.strerror or err}") from err
    if not rows:
        raise ConfigurationError(f"'{path}' is empty")
    header, body = rows[0], rows[1:]
    if tuple(header[: len(TRACE_COLUMNS)]) != TRACE_COLUMNS:
        raise ConfigurationError(
            f"'{path}' does not start with the columns {', '.join(TRACE_COLUMNS)}"
        )
    if not body:
        raise ConfigurationError(f"'{path}' has no samples")
    try:
        values = np.array([[float(cell) for cell in row] for row in body], dtype=float)
    except ValueError as err:
        raise ConfigurationError(f"'{path}' contains a non-numeric cell: {err}") from err
    if values.ndim != 2 or values.shape[1] != len(header):
        raise ConfigurationError(f"'{path}' has rows of differing length")
    named = {name: values[:, i] for i, name in enumerate(header)}
    return SimTrace(
        **{name: named[name] for name in TRACE_COLUMNS},
        auxiliary={name: named[name] for name in header[len(TRACE_COLUMNS) :]},
    )


def report_json(result: ScenarioResult) -> str:
    document = {
        "scenario": result.scenario.name,
        "description": result.scenario.description,
        "runs": [run.as_dict() for run in result.runs],
    }
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n"


def overlay_svg(result: ScenarioResult) -> str:
    fig = Figure(figsize=(8, 6))
    ax_y, ax_u = fig.subplots(2, 1, sharex=True)
    first = result.runs[0].trace
    ax_y.plot(first.t, first.r, "--", color="0.4", linewidth=1, label="setpoint")
    for run in result.runs:
        ax_y.plot(run.trace.t, run.trace.y, linewidth=1.2, label=run.run_id)
        ax_u.plot(run.trace.t, run.trace.u_applied, linewidth=1.0, label=run.run_id)
    ax_y.set_ylabel("output y")
    ax_y.set_title(result.scenario.name)
    ax_y.legend(loc="best", fontsize="small")
    ax_y.grid(True, alpha=0.3)
    ax_u.set_xlabel("time (s)")
    ax_u.set_ylabel("applied control u")
    ax_u.grid(True, alpha=0.3)
    fig.tight_layout()

    buffer = io.StringIO()
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def emit_outputs(result: ScenarioResult, run_dir: str | Path) -> list[Path]:
    """Write the CSV traces, JSON report and overlay chart of ``result``."""
    run_dir = Path(run_dir)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise OutputError(f"Cannot create run directory '{run_dir}': {err.strerror or err}") from err

    written = []
    for run in result.runs:
        written.append(write_trace_csv(run.trace, run_dir / f"{run.run_id}.csv"))

    report = run_dir / REPORT_NAME
    _write(report, report_json(result))
    written.append(report)

    if result.runs:
        plot = run_dir / PLOT_NAME
        _write(plot, overlay_svg(result))
        written.append(plot)

    logger.info(f"Wrote {len(written)} file(s) to {run_dir}")
    return written
