"""
Time-domain step metrics and the analytic second-order reference responses.

Conventions: rise time is the 10 % to 90 % crossing interval of the output
change, settling time is the last entry into a +/-2 % band around the final
value, both measured from the step time. The final value is the mean of the
trailing 10 % of the trace, so responses that do not settle on the setpoint
are measured against where they actually end up.
"""

from __future__ import annotations

import logging
import math
import warnings

from dataclasses import dataclass

import numpy as np

from ipdtsim.base import DegenerateMetricsError
from ipdtsim.diagnostics import UnsettledResponseWarning
from ipdtsim.dynamics import SimTrace
from ipdtsim.settings import ipdtsim_settings


logger = logging.getLogger(__name__)

CRITICAL_TOLERANCE = 1e-6


@dataclass(frozen=True)
class StepMetrics:
    rise_time: float
    settling_time: float
    overshoot_pct: float
    iae: float
    final_value: float
    peak_time: float = math.nan
    peak_value: float = math.nan
    max_control_step: float = math.nan
    flags: tuple[str, ...] = ()

    @property
    def settled(self) -> bool:
        return "not_settled" not in self.flags and "diverged" not in self.flags

    @classmethod
    def undefined(cls, *flags: str) -> StepMetrics:
        return cls(math.nan, math.nan, math.nan, math.nan, math.nan, flags=tuple(flags))

    def as_dict(self) -> dict:
        def clean(value):
            return None if value is None or not math.isfinite(value) else value

        return {
            "rise_time": clean(self.rise_time),
            "settling_time": clean(self.settling_time),
            "overshoot_pct": clean(self.overshoot_pct),
            "iae": clean(self.iae),
            "final_value": clean(self.final_value),
            "peak_time": clean(self.peak_time),
            "peak_value": clean(self.peak_value),
            "max_control_step": clean(self.max_control_step),
        }


def _trapezoid(values: np.ndarray, t: np.ndarray) -> float:
    if len(t) < 2:
        return 0.0
    return float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(t)))


def _first_crossing(t: np.ndarray, s: np.ndarray, level: float) -> float:
    above = np.flatnonzero(s >= level)
    if above.size == 0:
        return math.nan
    i = above[0]
    if i == 0:
        return float(t[0])
    frac = (level - s[i - 1]) / (s[i] - s[i - 1])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def max_control_step(trace: SimTrace) -> float:
    """Largest change of the applied control between consecutive samples."""
    if len(trace) < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(trace.u_applied))))


def compute_metrics(trace: SimTrace, step_time: float = 0.0) -> StepMetrics:
    if trace.diverged:
        return StepMetrics.undefined("diverged")

    eps = 1e-9 * max(1.0, abs(step_time))
    start = int(np.searchsorted(trace.t, step_time - eps))
    t = trace.t[start:]
    y = trace.y[start:]
    r = trace.r[start:]
    if len(t) < 3:
        raise DegenerateMetricsError(f"fewer than 3 samples after the step at t={step_time:g} s")

    r_before = trace.r[start - 1] if start > 0 else 0.0
    reference_change = r[-1] - r_before
    window = max(1, round(ipdtsim_settings.FINAL_WINDOW * len(y)))
    final_value = float(np.mean(y[-window:]))
    y0 = float(y[0])
    change = final_value - y0
    flags = []

    if reference_change != 0:
        if abs(change) <= 1e-12 * max(1.0, abs(final_value)):
            raise DegenerateMetricsError(
                f"output does not move for a setpoint change of {reference_change:g}"
            )
        s = (y - y0) / change
        rise_time = _first_crossing(t, s, ipdtsim_settings.RISE_HIGH) - _first_crossing(
            t, s, ipdtsim_settings.RISE_LOW
        )
        peak = int(np.argmax(s))
        overshoot_pct = max(0.0, (float(s[peak]) - 1.0) * 100.0)
        band = ipdtsim_settings.SETTLING_BAND * abs(change)
    else:
        # regulation: settle against a band relative to the largest excursion
        flags.append("regulation")
        peak = int(np.argmax(np.abs(y - final_value)))
        rise_time = math.nan
        overshoot_pct = math.nan
        band = ipdtsim_settings.SETTLING_BAND * abs(float(y[peak]) - final_value)

    outside = np.flatnonzero(np.abs(y - final_value) > band)
    if outside.size == 0:
        settling_time = 0.0
    else:
        last = outside[-1]
        settling_time = float(t[min(last + 1, len(t) - 1)] - step_time)
        if last >= len(t) - window:
            flags.append("not_settled")
            message = f"Response leaves the settling band within the final {window} samples"
            logger.info(message)
            warnings.warn(message, category=UnsettledResponseWarning, stacklevel=2)

    return StepMetrics(
        rise_time=rise_time,
        settling_time=settling_time,
        overshoot_pct=overshoot_pct,
        iae=_trapezoid(np.abs(r - y), t),
        final_value=final_value,
        peak_time=float(t[peak] - step_time),
        peak_value=float(y[peak]),
        max_control_step=max_control_step(trace),
        flags=tuple(flags),
    )


def expected_overshoot_pct(zeta: float) -> float:
    if zeta >= 1:
        return 0.0
    return 100.0 * math.exp(-math.pi * zeta / math.sqrt(1.0 - zeta * zeta))


def _as_output(t, values: np.ndarray):
    return float(values) if np.ndim(t) == 0 else values


def second_order_step(zeta: float, omega_n: float, t):
    """Unit-step response of ``wn**2 / (s**2 + 2 zeta wn s + wn**2)``."""
    times = np.maximum(np.asarray(t, dtype=float), 0.0)
    wt = omega_n * times
    if abs(zeta - 1.0) < CRITICAL_TOLERANCE:
        y = 1.0 - np.exp(-wt) * (1.0 + wt)
    elif zeta < 1.0:
        root = math.sqrt(1.0 - zeta * zeta)
        y = 1.0 - np.exp(-zeta * wt) / root * np.sin(root * wt + math.acos(zeta))
    else:
        root = math.sqrt(zeta * zeta - 1.0)
        s1 = -zeta + root
        s2 = -zeta - root
        y = 1.0 - (s2 * np.exp(s1 * wt) - s1 * np.exp(s2 * wt)) / (s2 - s1)
    return _as_output(t, y)


def regulation_response(zeta: float, omega_n: float, kp: float, t):
    """Response of ``Kp s / (s**2 + 2 zeta wn s + wn**2)`` to a unit step disturbance."""
    times = np.maximum(np.asarray(t, dtype=float), 0.0)
    wt = omega_n * times
    if abs(zeta - 1.0) < CRITICAL_TOLERANCE:
        y = kp * times * np.exp(-wt)
    elif zeta < 1.0:
        root = math.sqrt(1.0 - zeta * zeta)
        y = kp / (omega_n * root) * np.exp(-zeta * wt) * np.sin(root * wt)
    else:
        root = math.sqrt(zeta * zeta - 1.0)
        y = kp / (2.0 * omega_n * root) * (np.exp((-zeta + root) * wt) - np.exp((-zeta - root) * wt))
    return _as_output(t, y)
