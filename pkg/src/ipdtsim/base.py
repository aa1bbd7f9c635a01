from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass


class SimulationError(Exception):
    """Base exception for failures while a simulation is running."""

    pass


class NumericFault(SimulationError):
    """A state or derivative became non-finite."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t={t:g} s)")
        self.t = t


class ContractViolation(SimulationError):
    """A caller broke a precondition of a simulation primitive."""

    pass


class ModelValidityError(SimulationError):
    """The plant left the region where its equations are valid."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (t={t:g} s)")
        self.t = t


class IdentificationError(SimulationError):
    """A step test could not be turned into a process model."""

    pass


class NotIntegratingError(IdentificationError):
    """The recorded response has no terminal ramp phase."""

    pass


class DegenerateMetricsError(SimulationError):
    """Step metrics are undefined for the given trace."""

    pass


class ConfigurationError(Exception):
    """Configuration error that prevents a computation from starting."""

    pass


class InvalidModelError(ConfigurationError):
    """The process model cannot be tuned."""

    pass


class InvalidSpecError(ConfigurationError):
    """The requested tuning cannot produce a natural frequency."""

    pass


class ScenarioValidationError(ConfigurationError):
    """A scenario document failed validation at ``path``."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ControlOutput:
    u_ff: float
    u_fb: float
    u_applied: float


class AbstractProcess(ABC):
    """A plant advanced by the fixed-step loop.

    ``step`` receives the total plant input (controller output plus the
    input disturbance) held constant over ``[t, t + h]``.
    """

    #: names of auxiliary channels recorded after the fixed trace columns
    channels: tuple[str, ...] = ()

    @classmethod
    @abstractmethod
    def from_config(cls, config: dict, path: str = "plant") -> AbstractProcess:
        """Build a fresh process from its scenario table.

        Raise ``ScenarioValidationError`` naming ``path`` for bad input.
        """

    @abstractmethod
    def output(self) -> float:
        pass

    @abstractmethod
    def step(self, u: float, t: float, h: float) -> float:
        pass

    def auxiliary(self) -> tuple[float, ...]:
        return ()

    def nominal_model(self):
        """The IPDT description of this plant, when it has one by construction."""
        return None

    def dead_time(self) -> float:
        return 0.0

    def actuator_limits(self):
        """Physical limits of the final control element, if the plant has one."""
        return None


class AbstractController(ABC):
    @abstractmethod
    def update(self, r: float, y: float, h: float) -> ControlOutput:
        pass

    def preferred_step(self) -> float | None:
        """Upper bound on the step size this controller needs, if any."""
        return None
