"""
Parameter searches over the tuning knobs of the I+PI loop.

``aggressiveness_limits`` walks ``k`` upwards at a fixed damping factor and
reports where the phase-margin warning starts and where the delay-included
loop actually diverges. ``calibrate`` looks for the ``(zeta, k)`` pair whose
step metrics are closest to a reference set of rise time, settling time and
overshoot.
"""

from __future__ import annotations

import logging
import math
import warnings

from dataclasses import dataclass, field

from ipdtsim.analysis import StepMetrics, compute_metrics
from ipdtsim.base import ConfigurationError
from ipdtsim.control import IpiController, PiGains
from ipdtsim.diagnostics import LowPhaseMarginWarning, UnsettledResponseWarning
from ipdtsim.dynamics import Signal, SimTrace, TimeGrid, default_step, run_loop
from ipdtsim.processes.ipdt import IpdtModel, IpdtProcess
from ipdtsim.settings import ipdtsim_settings
from ipdtsim.tuning import TuningSpec, pi_gains, settling_time, tune


logger = logging.getLogger(__name__)

BENCHMARK_MODEL = IpdtModel(kp=0.0506, d=6.0)
REFERENCE_METRICS = (18.91, 60.10, 7.68)
DEFAULT_K_VALUES = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
DEFAULT_ZETAS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
DEFAULT_CAL_K_VALUES = (0.5, 0.75, 1.0, 1.25, 1.5)


def _default_horizon(model: IpdtModel, factor: float) -> float:
    return factor * (settling_time(model) + model.d)


def _closed_loop_step(
    model: IpdtModel, gains: PiGains, horizon: float, step: float | None
) -> SimTrace:
    grid = TimeGrid(step or default_step(model.d, gains.ti), horizon)
    limit = ipdtsim_settings.DIVERGENCE_FACTOR
    return run_loop(
        IpdtProcess(model.copy(state_y=0.0)),
        IpiController(gains),
        grid,
        Signal.step(1.0),
        Signal.constant(0.0),
        divergence_limit=limit,
    )


@dataclass(frozen=True)
class StabilityPoint:
    k: float
    kc: float
    ti: float
    phase_margin: float
    low_margin: bool
    diverged: bool

    def as_dict(self) -> dict:
        margin = self.phase_margin if math.isfinite(self.phase_margin) else None
        return {
            "k": self.k,
            "kc": self.kc,
            "ti": self.ti,
            "phase_margin_deg": margin,
            "low_phase_margin": self.low_margin,
            "diverged": self.diverged,
        }


@dataclass(frozen=True)
class StabilityLimits:
    zeta: float
    warning_k: float | None
    divergence_k: float | None
    points: tuple[StabilityPoint, ...] = field(default=())

    def as_dict(self) -> dict:
        return {
            "zeta": self.zeta,
            "warning_k": self.warning_k,
            "divergence_k": self.divergence_k,
            "points": [point.as_dict() for point in self.points],
        }


def aggressiveness_limits(
    model: IpdtModel = BENCHMARK_MODEL,
    zeta: float = 0.7,
    k_values=DEFAULT_K_VALUES,
    horizon: float | None = None,
    step: float | None = None,
) -> StabilityLimits:
    """Smallest ``k`` raising the phase-margin warning and smallest ``k`` that diverges."""
    k_values = sorted(k_values)
    if not k_values:
        raise ConfigurationError("at least one k value is required")
    horizon = horizon or _default_horizon(model, 12.0)
    points = []
    for k in k_values:
        report = tune(model, TuningSpec(zeta=zeta, k=k))
        trace = _closed_loop_step(model, report.gains, horizon, step)
        points.append(
            StabilityPoint(
                k=k,
                kc=report.gains.kc,
                ti=report.gains.ti,
                phase_margin=report.phase_margin,
                low_margin=report.low_margin,
                diverged=trace.diverged,
            )
        )
        logger.debug(f"k={k:g}: phase margin {report.phase_margin:.1f} deg, diverged={trace.diverged}")

    warning_k = next((p.k for p in points if p.low_margin), None)
    divergence_k = next((p.k for p in points if p.diverged), None)
    logger.info(f"zeta={zeta:g}: warning from k={warning_k}, divergence from k={divergence_k}")
    return StabilityLimits(zeta, warning_k, divergence_k, tuple(points))


@dataclass(frozen=True)
class CalibrationPoint:
    zeta: float
    k: float
    metrics: StepMetrics
    distance: float

    def as_dict(self) -> dict:
        return {
            "zeta": self.zeta,
            "k": self.k,
            "distance": self.distance if math.isfinite(self.distance) else None,
            "metrics": self.metrics.as_dict(),
            "flags": list(self.metrics.flags),
        }


@dataclass(frozen=True)
class CalibrationResult:
    target: tuple[float, float, float]
    best: CalibrationPoint | None
    points: tuple[CalibrationPoint, ...]

    def as_dict(self) -> dict:
        rise, settle, overshoot = self.target
        return {
            "target": {"rise_time": rise, "settling_time": settle, "overshoot_pct": overshoot},
            "best": self.best.as_dict() if self.best else None,
            "points": [point.as_dict() for point in self.points],
        }


def metric_distance(metrics: StepMetrics, target=REFERENCE_METRICS) -> float:
    """Root-sum-square of the relative errors, ``inf`` when a metric is undefined."""
    values = (metrics.rise_time, metrics.settling_time, metrics.overshoot_pct)
    if not metrics.settled or not all(math.isfinite(v) for v in values):
        return math.inf
    return math.sqrt(sum(((v - ref) / ref) ** 2 for v, ref in zip(values, target)))


def calibrate(
    model: IpdtModel = BENCHMARK_MODEL,
    zetas=DEFAULT_ZETAS,
    k_values=DEFAULT_CAL_K_VALUES,
    target: tuple[float, float, float] = REFERENCE_METRICS,
    horizon: float | None = None,
    step: float | None = None,
) -> CalibrationResult:
    if not zetas or not k_values:
        raise ConfigurationError("at least one zeta and one k value are required")
    if any(not value > 0 for value in target):
        raise ConfigurationError(f"target metrics must be positive, got {target}")
    horizon = horizon or _default_horizon(model, 8.0)
    points = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LowPhaseMarginWarning)
        warnings.simplefilter("ignore", UnsettledResponseWarning)
        for zeta in zetas:
            for k in k_values:
                gains = pi_gains(model, TuningSpec(zeta=zeta, k=k))
                metrics = compute_metrics(_closed_loop_step(model, gains, horizon, step))
                points.append(CalibrationPoint(zeta, k, metrics, metric_distance(metrics, target)))

    ranked = [p for p in points if math.isfinite(p.distance)]
    best = min(ranked, key=lambda p: p.distance) if ranked else None
    if best is None:
        logger.warning("No calibration point produced settled metrics")
    else:
        logger.info(f"Closest to the reference: zeta={best.zeta:g}, k={best.k:g} (distance {best.distance:.3f})")
    return CalibrationResult(tuple(target), best, tuple(points))
