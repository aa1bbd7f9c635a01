"""
PI settings for the I+PI structure from a damping factor and natural frequency.

Ignoring dead time, the regulator closes the loop into the standard
second-order form with ``2 zeta wn = Kp Kc`` and ``wn**2 = Kp Kc / Ti``,
which gives ``Kc = 2 zeta wn / Kp`` and ``Ti = 2 zeta / wn``. When ``wn`` is
not given it is derived from the model: the desired settling time is
``Ts = d / Kp`` and ``wn = 4 k / (zeta (Ts + d))``, where ``k`` scales how
aggressive the loop is. Dead time is only accounted for through ``Ts``, so a
phase-margin check of the delay-included loop flags settings that are likely
to ring or diverge.
"""

from __future__ import annotations

import logging
import math
import warnings

from dataclasses import dataclass

import numpy as np

from ipdtsim.base import InvalidModelError, InvalidSpecError
from ipdtsim.control import PiGains
from ipdtsim.diagnostics import LowPhaseMarginWarning
from ipdtsim.processes.ipdt import IpdtModel
from ipdtsim.settings import ipdtsim_settings


logger = logging.getLogger(__name__)

SWEEP_POINTS = 4000


@dataclass(frozen=True)
class TuningSpec:
    zeta: float = 0.7
    k: float = 1.0
    omega_n: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.zeta) and self.zeta > 0):
            raise InvalidSpecError(f"zeta must be positive, got {self.zeta}")
        if not (math.isfinite(self.k) and self.k > 0):
            raise InvalidSpecError(f"k must be positive, got {self.k}")
        if self.omega_n is not None and not (math.isfinite(self.omega_n) and self.omega_n > 0):
            raise InvalidSpecError(f"omega_n must be positive, got {self.omega_n}")


@dataclass(frozen=True)
class TuningReport:
    settling_time: float
    omega_n: float
    gains: PiGains
    phase_margin: float

    @property
    def low_margin(self) -> bool:
        return self.phase_margin < ipdtsim_settings.PHASE_MARGIN_WARNING

    def as_dict(self) -> dict:
        return {
            "settling_time": self.settling_time,
            "omega_n": self.omega_n,
            "kc": self.gains.kc,
            "ti": self.gains.ti,
            "phase_margin_deg": self.phase_margin if math.isfinite(self.phase_margin) else None,
            "low_phase_margin": self.low_margin,
        }


def settling_time(model: IpdtModel) -> float:
    if not model.kp or not math.isfinite(model.kp):
        raise InvalidModelError(f"process gain must be finite and non-zero, got {model.kp}")
    return model.d / abs(model.kp)


def natural_frequency(model: IpdtModel, spec: TuningSpec) -> float:
    if spec.omega_n is not None:
        return spec.omega_n
    horizon = settling_time(model) + model.d
    if not horizon > 0:
        raise InvalidSpecError(
            "natural frequency cannot be derived for a model without dead time; "
            "give omega_n explicitly"
        )
    return 4.0 * spec.k / (spec.zeta * horizon)


def _low_margin_message(report: TuningReport, spec: TuningSpec) -> str:
    return (
        f"Phase margin {report.phase_margin:.1f} deg of the dead-time loop is below "
        f"{ipdtsim_settings.PHASE_MARGIN_WARNING:g} deg "
        f"(zeta={spec.zeta}, k={spec.k}, wn={report.omega_n:.4g} rad/s); expect heavy ringing or divergence"
    )


def tune(model: IpdtModel, spec: TuningSpec) -> TuningReport:
    """Gains plus the data behind them. A low margin is logged, never raised as a warning."""
    omega_n = natural_frequency(model, spec)
    gains = PiGains(kc=2.0 * spec.zeta * omega_n / model.kp, ti=2.0 * spec.zeta / omega_n)
    report = TuningReport(
        settling_time=settling_time(model),
        omega_n=omega_n,
        gains=gains,
        phase_margin=phase_margin(model, gains),
    )
    if report.low_margin:
        logger.warning(_low_margin_message(report, spec), extra={"kc": gains.kc, "ti": gains.ti})
    return report


def pi_gains(model: IpdtModel, spec: TuningSpec) -> PiGains:
    report = tune(model, spec)
    if report.low_margin:
        warnings.warn(_low_margin_message(report, spec), category=LowPhaseMarginWarning, stacklevel=2)
    return report.gains


def _loop_phase(model: IpdtModel, gains: PiGains, omega: np.ndarray) -> np.ndarray:
    # only called with kc * kp > 0, so the gain signs cancel
    regulator = np.angle(1.0 + 1.0 / (1j * gains.ti * omega))
    plant = np.angle(1.0 / (1j * omega))
    return regulator + plant - omega * model.d


def phase_margin(model: IpdtModel, gains: PiGains) -> float:
    """Phase margin in degrees of ``Gfb(s) G(s)`` found by a frequency sweep.

    Returns ``-inf`` when the loop gain has the wrong sign for negative
    feedback and ``inf`` when the sweep finds no gain crossover.
    """
    loop_gain = gains.kc * model.kp
    if loop_gain <= 0:
        return -math.inf
    omega = np.logspace(-4, 3, SWEEP_POINTS) * loop_gain
    magnitude = np.abs(
        gains.kc * (1.0 + 1.0 / (1j * gains.ti * omega)) * model.kp / (1j * omega)
    )
    below = np.flatnonzero(magnitude < 1.0)
    if below.size == 0 or below[0] == 0:
        return math.inf
    i = below[0]
    log_mag = np.log(magnitude[i - 1 : i + 1])
    log_omega = np.log(omega[i - 1 : i + 1])
    crossover = math.exp(np.interp(0.0, log_mag[::-1], log_omega[::-1]))
    phase = float(_loop_phase(model, gains, np.array([crossover]))[0])
    return math.degrees(phase) + 180.0
