"""
Reduced depth-plane model of a torpedo-shaped AUV.

States are heave velocity ``w``, pitch rate ``q``, pitch angle ``theta`` and
depth ``z`` (positive down). The vehicle runs at constant surge speed
``u_surge``; linear damping terms scale with ``u_surge`` and stern-plane
lift with ``u_surge**2``:

    m_h  w' = z_w u w + z_ww w|w| + z_q u q + z_delta u^2 delta
    I_y  q' = m_w u w + m_q u q - m_theta sin(theta) + m_delta u^2 delta
    theta'  = q
    z'      = -u sin(theta) + w cos(theta)

A positive stern-plane deflection lifts the tail, pitches the nose down and
makes the vehicle dive.
"""

from __future__ import annotations

import logging
import math

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ipdtsim.base import (
    AbstractProcess,
    ConfigurationError,
    ModelValidityError,
    ScenarioValidationError,
)
from ipdtsim.dynamics import integrate_step, read_number
from ipdtsim.processes.actuator import ActuatorLimits
from ipdtsim.utils import load_bundled_toml, load_toml


logger = logging.getLogger(__name__)

BUILTIN_COEFFICIENTS = "auv_depth.toml"


@dataclass(frozen=True)
class AuvCoefficients:
    mass_heave: float
    inertia_pitch: float
    z_w: float
    z_ww: float
    z_q: float
    z_delta: float
    m_w: float
    m_q: float
    m_theta: float
    m_delta: float

    @classmethod
    def from_dict(cls, data: dict, path: str) -> AuvCoefficients:
        values = {f.name: read_number(data, f.name, f"{path}.{f.name}") for f in fields(cls)}
        for name in ("mass_heave", "inertia_pitch"):
            if values[name] <= 0:
                raise ScenarioValidationError(f"{path}.{name}", "must be positive")
        return cls(**values)


@dataclass(frozen=True)
class AuvDepthState:
    w: float = 0.0
    q: float = 0.0
    theta: float = 0.0
    z: float = 0.0
    #: stern-plane deflection currently applied, after rate limit and saturation
    stern: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.w, self.q, self.theta, self.z])


@dataclass(frozen=True)
class AuvDepthModel:
    u_surge: float
    coeffs: AuvCoefficients
    actuator: ActuatorLimits = field(default_factory=ActuatorLimits.unlimited)

    def __post_init__(self):
        if not (math.isfinite(self.u_surge) and self.u_surge > 0):
            raise ConfigurationError(f"u_surge must be positive, got {self.u_surge}")
        unstable = [ev for ev in self.pitch_heave_eigenvalues() if ev.real >= 0]
        if unstable:
            raise ConfigurationError(
                f"unforced heave/pitch dynamics do not decay at u_surge={self.u_surge} m/s "
                f"(eigenvalues {unstable})"
            )

    @classmethod
    def load(
        cls,
        u_surge: float,
        coefficients: str | Path = "builtin",
        actuator: ActuatorLimits | None = None,
        path: str = "plant.coefficients",
    ) -> AuvDepthModel:
        if str(coefficients) == "builtin":
            data = load_bundled_toml(BUILTIN_COEFFICIENTS)
        else:
            data = load_toml(coefficients)
        coeffs = AuvCoefficients.from_dict(data, path)
        if actuator is None:
            actuator = ActuatorLimits.from_dict(data, path)
        logger.debug(f"Loaded AUV coefficients from {coefficients} at u_surge={u_surge} m/s")
        return cls(u_surge, coeffs, actuator)

    def pitch_heave_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the (w, q, theta) subsystem linearised about trim."""
        c, u = self.coeffs, self.u_surge
        a = np.array(
            [
                [c.z_w * u / c.mass_heave, c.z_q * u / c.mass_heave, 0.0],
                [c.m_w * u / c.inertia_pitch, c.m_q * u / c.inertia_pitch, -c.m_theta / c.inertia_pitch],
                [0.0, 1.0, 0.0],
            ]
        )
        return np.linalg.eigvals(a)

    def derivative(self, x: np.ndarray, stern: float) -> np.ndarray:
        c, u = self.coeffs, self.u_surge
        w, q, theta, _z = x
        w_dot = (
            c.z_w * u * w + c.z_ww * w * abs(w) + c.z_q * u * q + c.z_delta * u * u * stern
        ) / c.mass_heave
        q_dot = (
            c.m_w * u * w + c.m_q * u * q - c.m_theta * math.sin(theta) + c.m_delta * u * u * stern
        ) / c.inertia_pitch
        z_dot = -u * math.sin(theta) + w * math.cos(theta)
        return np.array([w_dot, q_dot, q, z_dot])


def auv_step(
    model: AuvDepthModel, state: AuvDepthState, stern_cmd: float, t: float, h: float
) -> AuvDepthState:
    if not math.isfinite(stern_cmd):
        raise ModelValidityError(f"non-finite stern-plane command {stern_cmd}", t)
    stern = model.actuator.limit(stern_cmd, state.stern, h)
    x = integrate_step(lambda _t, x: model.derivative(x, stern), state.as_vector(), t, h)
    w, q, theta, z = (float(v) for v in x)
    if abs(theta) >= math.pi / 2:
        raise ModelValidityError(f"pitch angle {theta:.3f} rad outside (-pi/2, pi/2)", t + h)
    return AuvDepthState(w, q, theta, z, stern)


class AuvDepthProcess(AbstractProcess):
    channels = ("w", "q", "theta", "stern")

    def __init__(self, model: AuvDepthModel, state: AuvDepthState | None = None):
        self.model = model
        self.state = state or AuvDepthState()

    @classmethod
    def from_config(cls, config: dict, path: str = "plant") -> AuvDepthProcess:
        u_surge = read_number(config, "u_surge", f"{path}.u_surge", 0.8)
        if u_surge <= 0:
            raise ScenarioValidationError(f"{path}.u_surge", "must be positive")
        coefficients = config.get("coefficients", "builtin")
        if not isinstance(coefficients, str):
            raise ScenarioValidationError(f"{path}.coefficients", "expected 'builtin' or a file path")
        actuator = None
        if "actuator" in config:
            actuator = ActuatorLimits.from_dict(config["actuator"], f"{path}.actuator")
        try:
            model = AuvDepthModel.load(u_surge, coefficients, actuator, f"{path}.coefficients")
        except ConfigurationError as err:
            if isinstance(err, ScenarioValidationError):
                raise
            raise ScenarioValidationError(path, str(err)) from err
        z0 = read_number(config, "z0", f"{path}.z0", 0.0)
        return cls(model, AuvDepthState(z=z0))

    def output(self) -> float:
        return self.state.z

    def step(self, u: float, t: float, h: float) -> float:
        self.state = auv_step(self.model, self.state, u, t, h)
        return self.state.z

    def auxiliary(self) -> tuple[float, ...]:
        s = self.state
        return (s.w, s.q, s.theta, s.stern)

    def actuator_limits(self) -> ActuatorLimits:
        return self.model.actuator

