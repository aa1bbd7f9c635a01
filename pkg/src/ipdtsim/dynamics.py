"""
Fixed-step simulation engine.

A run advances a plant and a controller on a uniform time grid. At sample
``k`` (time ``k * h``) the controller reads the setpoint and the current
measurement, the row is recorded, and the plant is integrated over
``[t, t + h]`` with its input held constant. Everything here is
deterministic: the same inputs give a bit-identical trace.
"""

from __future__ import annotations

import logging
import math

from collections import deque
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ipdtsim.base import (
    AbstractController,
    AbstractProcess,
    ConfigurationError,
    ContractViolation,
    NumericFault,
    ScenarioValidationError,
)
from ipdtsim.settings import ipdtsim_settings


logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("t", "r", "d_in", "u_ff", "u_fb", "u_applied", "y")


def _time_eps(scale: float) -> float:
    return 1e-9 * max(1.0, abs(scale))


@dataclass(frozen=True)
class TimeGrid:
    step_h: float
    horizon_T: float

    def __post_init__(self):
        if not (math.isfinite(self.step_h) and self.step_h > 0):
            raise ConfigurationError(f"step_h must be positive, got {self.step_h}")
        if not (math.isfinite(self.horizon_T) and self.horizon_T >= self.step_h):
            raise ConfigurationError(
                f"horizon_T must be at least one step ({self.step_h}), got {self.horizon_T}"
            )

    @property
    def n_steps(self) -> int:
        return round(self.horizon_T / self.step_h)

    def time(self, k: int) -> float:
        return k * self.step_h

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.step_h


def default_step(dead_time: float = 0.0, ti: float | None = None) -> float:
    """Step size giving enough samples per dead time and per integral time."""
    candidates = [float(ipdtsim_settings.MAX_STEP)]
    if dead_time > 0:
        candidates.append(dead_time / ipdtsim_settings.DELAY_SAMPLES)
    if ti is not None and ti > 0:
        candidates.append(ti / ipdtsim_settings.INTEGRAL_SAMPLES)
    return min(candidates)


class SignalKind(str, Enum):
    STEP = "step"
    RAMP = "ramp"
    CONSTANT = "constant"
    SUM = "sum"


@dataclass(frozen=True)
class Signal:
    """A reference or disturbance source.

    For ``RAMP`` the amplitude is the slope in output units per second.
    """

    kind: SignalKind
    amplitude: float = 0.0
    start_time: float = 0.0
    terms: tuple[Signal, ...] = ()

    @classmethod
    def step(cls, amplitude: float, start_time: float = 0.0) -> Signal:
        return cls(SignalKind.STEP, amplitude, start_time)

    @classmethod
    def ramp(cls, slope: float, start_time: float = 0.0) -> Signal:
        return cls(SignalKind.RAMP, slope, start_time)

    @classmethod
    def constant(cls, value: float = 0.0) -> Signal:
        return cls(SignalKind.CONSTANT, value)

    @classmethod
    def sum(cls, *terms: Signal) -> Signal:
        return cls(SignalKind.SUM, terms=tuple(terms))

    @classmethod
    def from_dict(cls, data: dict, path: str) -> Signal:
        if not isinstance(data, dict):
            raise ScenarioValidationError(path, "expected a table")
        try:
            kind = SignalKind(data.get("kind", "constant"))
        except ValueError:
            raise ScenarioValidationError(
                f"{path}.kind",
                f"unknown signal kind {data.get('kind')!r}; "
                f"expected one of {[k.value for k in SignalKind]}",
            ) from None
        if kind is SignalKind.SUM:
            terms = data.get("terms")
            if not isinstance(terms, list) or not terms:
                raise ScenarioValidationError(
                    f"{path}.terms", "a sum signal needs at least one term"
                )
            return cls.sum(
                *(cls.from_dict(term, f"{path}.terms[{i}]") for i, term in enumerate(terms))
            )
        value_key = "slope" if kind is SignalKind.RAMP else "amplitude"
        amplitude = read_number(data, value_key, f"{path}.{value_key}", 0.0)
        start_time = read_number(data, "start_time", f"{path}.start_time", 0.0)
        return cls(kind, amplitude, start_time)

    def value(self, t: float) -> float:
        if self.kind is SignalKind.CONSTANT:
            return self.amplitude
        if self.kind is SignalKind.SUM:
            return math.fsum(term.value(t) for term in self.terms)
        if t < self.start_time - _time_eps(self.start_time):
            return 0.0
        if self.kind is SignalKind.STEP:
            return self.amplitude
        return self.amplitude * max(0.0, t - self.start_time)

    __call__ = value

    def step_change(self) -> tuple[float, float]:
        """The (time, size) of the first step this signal contains, or (0, 0)."""
        if self.kind is SignalKind.STEP:
            return self.start_time, self.amplitude
        for term in self.terms:
            change = term.step_change()
            if change[1]:
                return change
        return 0.0, 0.0

    def to_dict(self) -> dict:
        if self.kind is SignalKind.SUM:
            return {"kind": self.kind.value, "terms": [t.to_dict() for t in self.terms]}
        value_key = "slope" if self.kind is SignalKind.RAMP else "amplitude"
        return {
            "kind": self.kind.value,
            value_key: self.amplitude,
            "start_time": self.start_time,
        }


def read_number(data: dict, key: str, path: str, default: float | None = None) -> float:
    value = data.get(key, default)
    if value is None:
        raise ScenarioValidationError(path, "is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioValidationError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ScenarioValidationError(path, "must be finite")
    return float(value)


@dataclass
class DelayLine:
    """Transport delay of ``delay_d`` seconds on a fixed grid.

    Samples are pushed at strictly increasing times. Delays that are not a
    whole number of steps are read by linear interpolation between the two
    neighbouring stored samples.
    """

    delay_d: float
    step_h: float
    fill_value: float = 0.0
    buffer: deque = field(init=False, repr=False)
    _t_start: float | None = field(default=None, init=False, repr=False)
    _t_last: float | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.delay_d) and self.delay_d >= 0):
            raise ConfigurationError(f"delay_d must be >= 0, got {self.delay_d}")
        if not self.step_h > 0:
            raise ConfigurationError(f"step_h must be positive, got {self.step_h}")
        self.buffer = deque(maxlen=self.capacity)

    @property
    def capacity(self) -> int:
        return math.ceil(self.delay_d / self.step_h - 1e-9) + 2

    def push_pop(self, t: float, u: float) -> float:
        eps = 1e-6 * self.step_h
        if self._t_last is not None and t <= self._t_last + eps:
            raise ContractViolation(
                f"delay line pushed at t={t:g} s after t={self._t_last:g} s"
            )
        if self._t_start is None:
            self._t_start = t
        self._t_last = t
        self.buffer.append((t, u))

        target = t - self.delay_d
        if target < self._t_start - eps:
            return self.fill_value

        buffer = self.buffer
        while len(buffer) >= 2 and buffer[1][0] <= target + eps:
            buffer.popleft()
        t0, u0 = buffer[0]
        if len(buffer) == 1 or abs(target - t0) <= eps:
            return u0
        t1, u1 = buffer[1]
        weight = (target - t0) / (t1 - t0)
        return u0 + weight * (u1 - u0)


def delay_push_pop(line: DelayLine, t: float, u: float) -> float:
    return line.push_pop(t, u)


def integrate_step(
    deriv: Callable[[float, np.ndarray], np.ndarray],
    x: np.ndarray | Sequence[float],
    t: float,
    h: float,
) -> np.ndarray:
    """Advance ``x`` over one classical Runge-Kutta step.

    Inputs seen by ``deriv`` must be held constant over the step.
    """
    if not h > 0:
        raise ContractViolation(f"integration step must be positive, got {h}")
    x = np.asarray(x, dtype=float)
    half = 0.5 * h
    k1 = _checked(deriv(t, x), t)
    k2 = _checked(deriv(t + half, x + half * k1), t)
    k3 = _checked(deriv(t + half, x + half * k2), t)
    k4 = _checked(deriv(t + h, x + h * k3), t)
    x_next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_next)):
        raise NumericFault("state became non-finite", t)
    return x_next


def _checked(k, t: float) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(k)):
        raise NumericFault("non-finite derivative", t)
    return k


@dataclass
class SimTrace:
    """Uniformly sampled record of one closed-loop or open-loop run."""

    t: np.ndarray
    r: np.ndarray
    d_in: np.ndarray
    u_ff: np.ndarray
    u_fb: np.ndarray
    u_applied: np.ndarray
    y: np.ndarray
    auxiliary: dict[str, np.ndarray] = field(default_factory=dict)
    diverged: bool = False

    def __len__(self) -> int:
        return len(self.t)

    @property
    def step_h(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    @property
    def columns(self) -> tuple[str, ...]:
        return TRACE_COLUMNS + tuple(self.auxiliary)

    def column(self, name: str) -> np.ndarray:
        if name in TRACE_COLUMNS:
            return getattr(self, name)
        return self.auxiliary[name]

    def equals(self, other: SimTrace) -> bool:
        return (
            self.columns == other.columns
            and self.diverged == other.diverged
            and all(
                np.array_equal(self.column(name), other.column(name))
                for name in self.columns
            )
        )


def run_loop(
    process: AbstractProcess,
    controller: AbstractController,
    grid: TimeGrid,
    setpoint: Signal,
    disturbance: Signal,
    divergence_limit: float | None = None,
) -> SimTrace:
    """Simulate the loop of a controller around a plant.

    The disturbance is added to the controller output at the plant input.
    With ``divergence_limit`` set the run stops at the first sample whose
    output magnitude exceeds it and the trace is marked ``diverged``.
    """
    n = grid.n_steps + 1
    h = grid.step_h
    rows = np.zeros((len(TRACE_COLUMNS), n))
    aux = np.zeros((len(process.channels), n))
    diverged = False
    logger.debug(f"Running {n} samples at h={h:g} s")

    for k in range(n):
        t = grid.time(k)
        r = setpoint.value(t)
        d_in = disturbance.value(t)
        y = process.output()
        out = controller.update(r, y, h)
        rows[:, k] = (t, r, d_in, out.u_ff, out.u_fb, out.u_applied, y)
        if process.channels:
            aux[:, k] = process.auxiliary()

        if divergence_limit is not None and abs(y) > divergence_limit:
            diverged = True
            n = k + 1
            logger.info(f"Run diverged at t={t:g} s (|y|={abs(y):.3g})")
            break
        if k < n - 1:
            try:
                process.step(out.u_applied + d_in, t, h)
            except NumericFault:
                logger.error(f"Numeric fault while stepping plant at t={t:g} s", exc_info=True)
                raise

    return SimTrace(
        *(rows[i, :n].copy() for i in range(len(TRACE_COLUMNS))),
        auxiliary={name: aux[i, :n].copy() for i, name in enumerate(process.channels)},
        diverged=diverged,
    )
