"""
Controller blocks.

All integrators use trapezoidal accumulation between consecutive calls, so
the first call after a reset contributes nothing. The composite I+PI law is

    u = Kc/Ti * integral(r) - Kc * (y + integral(y) / Ti)

i.e. an integral-only feedforward on the setpoint and a PI regulator acting
on the measurement. Both blocks read the same ``PiGains``.
"""

from __future__ import annotations

import math

from dataclasses import dataclass

from ipdtsim.base import AbstractController, ConfigurationError, ControlOutput
from ipdtsim.processes.actuator import ActuatorLimits
from ipdtsim.settings import ipdtsim_settings


@dataclass(frozen=True)
class PiGains:
    kc: float
    ti: float

    def __post_init__(self):
        if not math.isfinite(self.kc):
            raise ConfigurationError(f"kc must be finite, got {self.kc}")
        if not (math.isfinite(self.ti) and self.ti > 0):
            raise ConfigurationError(f"ti must be positive, got {self.ti}")

    @property
    def ki(self) -> float:
        return self.kc / self.ti


@dataclass(frozen=True)
class PidGains:
    kc: float
    ti: float
    td: float = 0.0
    deriv_filter_n: float = 10.0

    def __post_init__(self):
        PiGains(self.kc, self.ti)
        if not (math.isfinite(self.td) and self.td >= 0):
            raise ConfigurationError(f"td must be >= 0, got {self.td}")
        if self.td > 0 and not 5 <= self.deriv_filter_n <= 20:
            raise ConfigurationError(
                f"deriv_filter_n must lie in [5, 20] when td > 0, got {self.deriv_filter_n}"
            )

    @property
    def pi(self) -> PiGains:
        return PiGains(self.kc, self.ti)


@dataclass
class ControllerState:
    integ_ff: float = 0.0
    integ_fb: float = 0.0
    prev_meas: float | None = None
    u_last: float = 0.0
    prev_r: float | None = None
    prev_e: float | None = None
    deriv: float = 0.0
    # integrator increments of the current sample and their effect on u,
    # undone by apply_actuator when they push further into a limit
    pending_ff: float = 0.0
    pending_fb: float = 0.0
    pending_du: float = 0.0
    frozen: bool = False

    def begin_sample(self):
        self.pending_ff = self.pending_fb = self.pending_du = 0.0


def i_feedforward(state: ControllerState, gains: PiGains, r: float, h: float) -> float:
    if state.prev_r is not None:
        increment = 0.5 * h * (state.prev_r + r)
        state.integ_ff += increment
        state.pending_ff += increment
        state.pending_du += gains.ki * increment
    state.prev_r = r
    return gains.ki * state.integ_ff


def pi_feedback(state: ControllerState, gains: PiGains, e: float, h: float) -> float:
    if state.prev_e is not None:
        increment = 0.5 * h * (state.prev_e + e)
        state.integ_fb += increment
        state.pending_fb += increment
        state.pending_du += gains.ki * increment
    state.prev_e = e
    return gains.kc * e + gains.ki * state.integ_fb


def ipi_controller(
    state: ControllerState, gains: PiGains, r: float, y: float, h: float
) -> ControlOutput:
    state.begin_sample()
    u_ff = i_feedforward(state, gains, r, h)
    u_fb = pi_feedback(state, gains, y, h)
    # the regulator sits on the measurement path, so its integral opposes u
    state.pending_du = gains.ki * (state.pending_ff - state.pending_fb)
    return ControlOutput(u_ff, u_fb, u_ff - u_fb)


def pid_controller(
    state: ControllerState, gains: PidGains, r: float, y: float, h: float
) -> ControlOutput:
    """Standard-form PID with derivative on the filtered measurement."""
    state.begin_sample()
    u = pi_feedback(state, gains.pi, r - y, h)
    if gains.td > 0:
        tf = gains.td / gains.deriv_filter_n
        if state.prev_meas is not None:
            state.deriv = (tf * state.deriv - gains.td * (y - state.prev_meas)) / (tf + h)
        u += gains.kc * state.deriv
    state.prev_meas = y
    return ControlOutput(0.0, u, u)


def apply_actuator(
    u: float, limits: ActuatorLimits, state: ControllerState, h: float
) -> float:
    """Rate-limit then clamp ``u``; freeze the integrators while they wind up."""
    applied = limits.limit(u, state.u_last, h)
    excess = u - applied
    state.frozen = excess != 0 and state.pending_du * excess > 0
    if state.frozen:
        state.integ_ff -= state.pending_ff
        state.integ_fb -= state.pending_fb
    state.begin_sample()
    state.u_last = applied
    return applied


class IpiController(AbstractController):
    """Feedforward I plus feedback PI, sharing one set of gains."""

    def __init__(self, gains: PiGains, limits: ActuatorLimits | None = None):
        self.gains = gains
        self.limits = limits or ActuatorLimits.unlimited()
        self.state = ControllerState()

    def update(self, r: float, y: float, h: float) -> ControlOutput:
        out = ipi_controller(self.state, self.gains, r, y, h)
        applied = apply_actuator(out.u_applied, self.limits, self.state, h)
        return ControlOutput(out.u_ff, out.u_fb, applied)

    def preferred_step(self) -> float:
        return self.gains.ti / ipdtsim_settings.INTEGRAL_SAMPLES


class PidController(AbstractController):
    def __init__(self, gains: PidGains, limits: ActuatorLimits | None = None):
        self.gains = gains
        self.limits = limits or ActuatorLimits.unlimited()
        self.state = ControllerState()

    def update(self, r: float, y: float, h: float) -> ControlOutput:
        out = pid_controller(self.state, self.gains, r, y, h)
        applied = apply_actuator(out.u_applied, self.limits, self.state, h)
        return ControlOutput(out.u_ff, out.u_fb, applied)

    def preferred_step(self) -> float:
        bounds = [self.gains.ti / ipdtsim_settings.INTEGRAL_SAMPLES]
        if self.gains.td > 0:
            bounds.append(self.gains.td / self.gains.deriv_filter_n)
        return min(bounds)


class ZeroController(AbstractController):
    """Open loop: the plant sees only the input disturbance channel."""

    def update(self, r: float, y: float, h: float) -> ControlOutput:
        return ControlOutput(0.0, 0.0, 0.0)
