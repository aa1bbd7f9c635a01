from __future__ import annotations

import math

from dataclasses import dataclass

from ipdtsim.base import ConfigurationError, ScenarioValidationError
from ipdtsim.dynamics import read_number


@dataclass(frozen=True)
class ActuatorLimits:
    """Deflection and slew limits of a final control element.

    ``math.inf`` for either field disables that limit.
    """

    max_deflection: float = math.inf
    max_rate: float = math.inf

    def __post_init__(self):
        if not self.max_deflection > 0:
            raise ConfigurationError(f"max_deflection must be positive, got {self.max_deflection}")
        if not self.max_rate > 0:
            raise ConfigurationError(f"max_rate must be positive, got {self.max_rate}")

    @classmethod
    def unlimited(cls) -> ActuatorLimits:
        return cls()

    @classmethod
    def from_dict(cls, data: dict, path: str) -> ActuatorLimits:
        max_deflection = max_rate = math.inf
        if "max_deflection" in data:
            max_deflection = read_number(data, "max_deflection", f"{path}.max_deflection")
        if "max_rate" in data:
            max_rate = read_number(data, "max_rate", f"{path}.max_rate")
        if max_deflection <= 0:
            raise ScenarioValidationError(f"{path}.max_deflection", "must be positive")
        if max_rate <= 0:
            raise ScenarioValidationError(f"{path}.max_rate", "must be positive")
        return cls(max_deflection, max_rate)

    @property
    def is_unlimited(self) -> bool:
        return math.isinf(self.max_deflection) and math.isinf(self.max_rate)

    def limit(self, command: float, previous: float, h: float) -> float:
        """Rate-limit ``command`` relative to ``previous``, then clamp it."""
        max_change = self.max_rate * h
        value = command
        if command - previous > max_change:
            value = previous + max_change
        elif command - previous < -max_change:
            value = previous - max_change
        return min(max(value, -self.max_deflection), self.max_deflection)
