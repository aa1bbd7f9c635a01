from __future__ import annotations

import math

from dataclasses import dataclass

import numpy as np

from ipdtsim.base import (
    AbstractProcess,
    ConfigurationError,
    InvalidModelError,
    ScenarioValidationError,
)
from ipdtsim.dynamics import DelayLine, integrate_step, read_number


@dataclass
class IpdtModel:
    """Integrating process with dead time, ``G(s) = kp * exp(-d s) / s``."""

    kp: float
    d: float = 0.0
    state_y: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.kp) or self.kp == 0:
            raise InvalidModelError(f"process gain kp must be finite and non-zero, got {self.kp}")
        if not (math.isfinite(self.d) and self.d >= 0):
            raise ConfigurationError(f"dead time d must be >= 0, got {self.d}")

    def copy(self, **changes) -> IpdtModel:
        values = {"kp": self.kp, "d": self.d, "state_y": self.state_y, **changes}
        return IpdtModel(**values)


def ipdt_step(model: IpdtModel, line: DelayLine, u: float, t: float, h: float) -> float:
    """Advance the output by ``kp`` times the integral of the delayed input over one step."""
    u_delayed = line.push_pop(t, u)
    rate = np.array([model.kp * u_delayed])
    x = integrate_step(lambda _t, _x: rate, (model.state_y,), t, h)
    model.state_y = float(x[0])
    return model.state_y


class IpdtProcess(AbstractProcess):
    def __init__(self, model: IpdtModel):
        self.model = model
        self._line: DelayLine | None = None

    @classmethod
    def from_config(cls, config: dict, path: str = "plant") -> IpdtProcess:
        kp = read_number(config, "kp", f"{path}.kp")
        d = read_number(config, "d", f"{path}.d", 0.0)
        y0 = read_number(config, "y0", f"{path}.y0", 0.0)
        if kp == 0:
            raise ScenarioValidationError(f"{path}.kp", "must be non-zero")
        if d < 0:
            raise ScenarioValidationError(f"{path}.d", "must be >= 0")
        return cls(IpdtModel(kp, d, y0))

    def output(self) -> float:
        return self.model.state_y

    def step(self, u: float, t: float, h: float) -> float:
        if self._line is None:
            self._line = DelayLine(self.model.d, h)
        return ipdt_step(self.model, self._line, u, t, h)

    def nominal_model(self) -> IpdtModel:
        return self.model.copy(state_y=0.0)

    def dead_time(self) -> float:
        return self.model.d
