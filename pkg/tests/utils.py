import copy
import os

from contextlib import contextmanager
from unittest import mock

import numpy as np

from ipdtsim.base import AbstractProcess, NumericFault
from ipdtsim.control import IpiController, PiGains
from ipdtsim.dynamics import Signal, SimTrace, TimeGrid, run_loop
from ipdtsim.processes.ipdt import IpdtModel, IpdtProcess
from ipdtsim.settings import ENV_PREFIX, ipdtsim_settings


BASE_SCENARIO = {
    "name": "unit-test",
    "plant": {"kind": "ipdt", "kp": 1.0, "d": 0.5},
    "controller": {"kind": "ipi", "zeta": 0.7, "omega_n": 0.5},
    "grid": {"horizon": 40.0, "step": 0.05},
    "setpoint": {"kind": "step", "amplitude": 1.0},
    "disturbance": {"kind": "constant", "amplitude": 0.0},
}


@contextmanager
def override_settings(**values):
    """Temporarily override ipdtsim settings through the environment."""
    env = {f"{ENV_PREFIX}{key}": str(value) for key, value in values.items()}
    with mock.patch.dict(os.environ, env):
        ipdtsim_settings.reload()
        try:
            yield
        finally:
            ipdtsim_settings.reload()
    ipdtsim_settings.reload()


def scenario_dict(**overrides) -> dict:
    data = copy.deepcopy(BASE_SCENARIO)
    for key, value in overrides.items():
        if value is None:
            data.pop(key, None)
        else:
            data[key] = value
    return data


def make_trace(t, y, r=None, u=None) -> SimTrace:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    zeros = np.zeros_like(t)
    r = np.broadcast_to(np.asarray(1.0 if r is None else r, dtype=float), t.shape).copy()
    u = zeros.copy() if u is None else np.asarray(u, dtype=float)
    return SimTrace(t=t, r=r, d_in=zeros.copy(), u_ff=zeros.copy(), u_fb=u.copy(), u_applied=u, y=y)


def simulate_ipi(
    kp,
    d,
    gains: PiGains,
    horizon,
    step,
    setpoint=None,
    disturbance=None,
    limits=None,
) -> SimTrace:
    return run_loop(
        IpdtProcess(IpdtModel(kp, d)),
        IpiController(gains, limits),
        TimeGrid(step, horizon),
        setpoint or Signal.step(1.0),
        disturbance or Signal.constant(0.0),
    )


class FirstOrderProcess(AbstractProcess):
    """Self-regulating lag ``1 / (tau s + 1)`` used to exercise error paths."""

    def __init__(self, tau=5.0):
        self.tau = tau
        self.y = 0.0

    @classmethod
    def from_config(cls, config, path="plant"):
        return cls(config.get("tau", 5.0))

    def output(self):
        return self.y

    def step(self, u, t, h):
        self.y += (u - self.y) * (1.0 - np.exp(-h / self.tau))
        return self.y


class ExplodingProcess(FirstOrderProcess):
    def step(self, u, t, h):
        raise NumericFault("state became non-finite", t)
