"""
Step-test identification of an integrating process with dead time.

After an open-loop input step an integrating plant settles into a ramp. A
least-squares line through the final part of the response gives the process
gain from its slope, and the dead time from where the line crosses the
pre-step output level.
"""

from __future__ import annotations

import logging
import math
import warnings

from dataclasses import dataclass

import numpy as np

from ipdtsim.base import AbstractProcess, IdentificationError, NotIntegratingError
from ipdtsim.control import ZeroController
from ipdtsim.diagnostics import DeadTimeClampedWarning
from ipdtsim.dynamics import Signal, SimTrace, TimeGrid, default_step, run_loop
from ipdtsim.processes.ipdt import IpdtModel
from ipdtsim.settings import ipdtsim_settings


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepTestRecord:
    trace: SimTrace
    step_amplitude: float
    step_time: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.step_amplitude) and self.step_amplitude != 0):
            raise IdentificationError("step amplitude must be finite and non-zero")
        steps = np.diff(self.trace.t)
        if len(steps) < 4 or not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
            raise IdentificationError("step-test trace must be uniformly sampled")


@dataclass(frozen=True)
class IdentificationResult:
    model: IpdtModel
    slope: float
    intercept_time: float
    fit_residual: float
    linear_fraction: float
    window_start: float

    def as_dict(self) -> dict:
        return {
            "kp": self.model.kp,
            "d": self.model.d,
            "slope": self.slope,
            "intercept_time": self.intercept_time,
            "fit_residual": self.fit_residual,
            "linear_fraction": self.linear_fraction,
            "window_start": self.window_start,
        }


def _slope(t: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(t, y, 1)[0])


def identify_ipdt(rec: StepTestRecord) -> IdentificationResult:
    trace = rec.trace
    t, y = trace.t, trace.y
    start = int(np.searchsorted(t, rec.step_time - 1e-9 * max(1.0, abs(rec.step_time))))
    if start >= len(t) - 8:
        raise IdentificationError(f"no samples after the step at t={rec.step_time:g} s")
    y_base = float(y[start])
    excursion = float(y[-1]) - y_base

    quarter = len(t) - max(4, len(t) // 4)
    middle = (quarter + len(t)) // 2
    slope_early = _slope(t[quarter:middle], y[quarter:middle])
    slope_late = _slope(t[middle:], y[middle:])
    slope_quarter = _slope(t[quarter:], y[quarter:])
    ramp_rise = abs(slope_quarter) * (t[-1] - t[start])
    if excursion == 0 or ramp_rise < 0.01 * abs(excursion):
        raise NotIntegratingError("response has no ramp phase; output settles to a constant")
    variation = abs(slope_late - slope_early) / abs(slope_quarter)
    if variation > ipdtsim_settings.RAMP_TOLERANCE:
        raise NotIntegratingError(
            f"final-quarter slope varies by {100 * variation:.1f} %, "
            f"above {100 * ipdtsim_settings.RAMP_TOLERANCE:g} %"
        )

    first = len(t) - max(2, round(ipdtsim_settings.FIT_WINDOW * len(t)))
    first = max(first, start)
    t_fit, y_fit = t[first:], y[first:] - y_base
    slope, intercept = (float(c) for c in np.polyfit(t_fit, y_fit, 1))
    intercept_time = -intercept / slope
    dead_time = intercept_time - rec.step_time
    # rounding of the fit on delay-free data lands a few ulps either side of the step
    tolerance = 1e-9 * max(1.0, abs(rec.step_time), trace.step_h)
    if dead_time < -tolerance:
        message = f"Fitted ramp crosses the baseline {-dead_time:.3g} s before the step; dead time clamped to 0"
        logger.warning(message)
        warnings.warn(message, category=DeadTimeClampedWarning, stacklevel=2)
    dead_time = max(dead_time, 0.0)

    line = slope * t + intercept
    residual = float(np.sqrt(np.mean((y_fit - line[first:]) ** 2)))
    scale = abs(slope) * (t_fit[-1] - t_fit[0]) or 1.0
    on_line = np.abs((y[start:] - y_base) - line[start:]) <= 0.01 * abs(excursion)
    result = IdentificationResult(
        model=IpdtModel(kp=slope / rec.step_amplitude, d=dead_time),
        slope=slope,
        intercept_time=intercept_time,
        fit_residual=residual / scale,
        linear_fraction=float(np.mean(on_line)),
        window_start=float(t_fit[0]),
    )
    logger.info(f"Identified kp={result.model.kp:.5g}, d={result.model.d:.4g} s")
    return result


def step_test(
    process: AbstractProcess,
    step_amplitude: float,
    step_time: float = 0.0,
    horizon: float = 100.0,
    step_h: float | None = None,
) -> StepTestRecord:
    """Apply an open-loop input step to ``process`` and record the response."""
    grid = TimeGrid(step_h or default_step(process.dead_time()), horizon)
    trace = run_loop(
        process,
        ZeroController(),
        grid,
        Signal.constant(0.0),
        Signal.step(step_amplitude, step_time),
    )
    return StepTestRecord(trace, step_amplitude, step_time)
