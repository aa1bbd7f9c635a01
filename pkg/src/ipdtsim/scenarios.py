"""
Scenario documents and their execution.

A scenario names one plant, one controller, a time grid and the setpoint and
disturbance sources. Optional ``comparisons`` add more controllers on the
same plant and optional ``sweeps`` repeat everything over the cartesian
product of parameter values. The document schema is described in
``docs/scenarios.md``.
"""

from __future__ import annotations

import copy
import itertools
import logging
import re

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from ipdtsim.analysis import StepMetrics, compute_metrics
from ipdtsim.base import (
    AbstractController,
    AbstractProcess,
    ConfigurationError,
    ScenarioValidationError,
)
from ipdtsim.control import IpiController, PidController, PidGains, ZeroController
from ipdtsim.dynamics import Signal, SimTrace, TimeGrid, default_step, read_number, run_loop
from ipdtsim.identification import identify_ipdt, step_test
from ipdtsim.processes.actuator import ActuatorLimits
from ipdtsim.processes.ipdt import IpdtModel
from ipdtsim.settings import ipdtsim_settings
from ipdtsim.tuning import TuningSpec, pi_gains
from ipdtsim.utils import (
    PLANT_BACKENDS,
    bundled_scenario_names,
    import_process_class,
    load_bundled_toml,
    load_toml,
)


logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {
    "name",
    "description",
    "plant",
    "controller",
    "actuator",
    "grid",
    "setpoint",
    "disturbance",
    "comparisons",
    "sweeps",
}
PATH_SYNTAX = re.compile(r"[A-Za-z_][\w-]*(\[\d+\])*(\.[A-Za-z_][\w-]*(\[\d+\])*)*")
PATH_TOKEN = re.compile(r"([A-Za-z_][\w-]*)|\[(\d+)\]")


class ControllerKind(str, Enum):
    IPI = "ipi"
    PID = "pid"
    NONE = "none"


class ModelSource(str, Enum):
    PLANT = "plant"
    EXPLICIT = "explicit"
    IDENTIFY = "identify"


@dataclass(frozen=True)
class TuningModelConfig:
    source: ModelSource = ModelSource.PLANT
    model: IpdtModel | None = None
    step_amplitude: float = 1.0
    step_time: float = 0.0
    horizon: float = 100.0

    @classmethod
    def from_dict(cls, data: dict, path: str) -> TuningModelConfig:
        if not isinstance(data, dict):
            raise ScenarioValidationError(path, "expected a table")
        try:
            source = ModelSource(data.get("source", "plant"))
        except ValueError:
            raise ScenarioValidationError(
                f"{path}.source",
                f"expected one of {[s.value for s in ModelSource]}",
            ) from None
        if source is ModelSource.EXPLICIT:
            kp = read_number(data, "kp", f"{path}.kp")
            d = read_number(data, "d", f"{path}.d", 0.0)
            if kp == 0:
                raise ScenarioValidationError(f"{path}.kp", "must be non-zero")
            if d < 0:
                raise ScenarioValidationError(f"{path}.d", "must be >= 0")
            return cls(source, IpdtModel(kp, d))
        if source is ModelSource.IDENTIFY:
            amplitude = read_number(data, "step_amplitude", f"{path}.step_amplitude", 1.0)
            if amplitude == 0:
                raise ScenarioValidationError(f"{path}.step_amplitude", "must be non-zero")
            horizon = read_number(data, "horizon", f"{path}.horizon", 100.0)
            step_time = read_number(data, "step_time", f"{path}.step_time", 0.0)
            if horizon <= step_time:
                raise ScenarioValidationError(f"{path}.horizon", "must extend past step_time")
            return cls(source, None, amplitude, step_time, horizon)
        return cls(source)


@dataclass(frozen=True)
class ControllerConfig:
    kind: ControllerKind
    label: str
    spec: TuningSpec | None = None
    tuning_model: TuningModelConfig = field(default_factory=TuningModelConfig)
    pid: PidGains | None = None

    @classmethod
    def from_dict(cls, data: dict, path: str, default_label: str) -> ControllerConfig:
        if not isinstance(data, dict):
            raise ScenarioValidationError(path, "expected a table")
        try:
            kind = ControllerKind(data.get("kind", "ipi"))
        except ValueError:
            raise ScenarioValidationError(
                f"{path}.kind", f"expected one of {[k.value for k in ControllerKind]}"
            ) from None
        label = data.get("label", default_label)
        if not isinstance(label, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", label):
            raise ScenarioValidationError(f"{path}.label", "use letters, digits, '.', '_' or '-'")

        if kind is ControllerKind.IPI:
            omega_n = data.get("omega_n")
            if omega_n is not None:
                omega_n = read_number(data, "omega_n", f"{path}.omega_n")
            zeta = read_number(data, "zeta", f"{path}.zeta", 0.7)
            k = read_number(data, "k", f"{path}.k", 1.0)
            for key, value in (("zeta", zeta), ("k", k), ("omega_n", omega_n)):
                if value is not None and value <= 0:
                    raise ScenarioValidationError(f"{path}.{key}", "must be positive")
            return cls(
                kind,
                label,
                spec=TuningSpec(zeta, k, omega_n),
                tuning_model=TuningModelConfig.from_dict(data.get("model", {}), f"{path}.model"),
            )
        if kind is ControllerKind.PID:
            kc = read_number(data, "kc", f"{path}.kc")
            ti = read_number(data, "ti", f"{path}.ti")
            td = read_number(data, "td", f"{path}.td", 0.0)
            n = read_number(data, "n", f"{path}.n", ipdtsim_settings.DERIV_FILTER_N)
            try:
                gains = PidGains(kc, ti, td, n)
            except ConfigurationError as err:
                raise ScenarioValidationError(path, str(err)) from err
            return cls(kind, label, pid=gains)
        return cls(kind, label)


@dataclass(frozen=True)
class Sweep:
    path: str
    values: tuple[Any, ...]


@dataclass(frozen=True)
class Scenario:
    name: str
    plant_kind: str
    plant: dict
    controller: ControllerConfig
    horizon: float
    setpoint: Signal
    disturbance: Signal
    step: float | None = None
    actuator: ActuatorLimits | None = None
    comparisons: tuple[ControllerConfig, ...] = ()
    sweeps: tuple[Sweep, ...] = ()
    description: str = ""
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_dict(cls, data: dict) -> Scenario:
        if not isinstance(data, dict):
            raise ScenarioValidationError("<root>", "expected a table")
        unknown = sorted(set(data) - TOP_LEVEL_KEYS)
        if unknown:
            raise ScenarioValidationError(unknown[0], "unknown key")
        raw = _normalise(data)

        name = raw.get("name")
        if not isinstance(name, str) or not name.strip():
            raise ScenarioValidationError("name", "is required")

        plant = raw.get("plant")
        if not isinstance(plant, dict):
            raise ScenarioValidationError("plant", "exactly one plant table is required")
        plant_kind = plant.get("kind")
        if not isinstance(plant_kind, str):
            raise ScenarioValidationError("plant.kind", f"expected one of {sorted(PLANT_BACKENDS)} or a dotted path")

        controller = ControllerConfig.from_dict(raw.get("controller"), "controller", "main")
        comparisons = raw.get("comparisons", [])
        if not isinstance(comparisons, list):
            raise ScenarioValidationError("comparisons", "expected an array of tables")
        parsed_comparisons = tuple(
            ControllerConfig.from_dict(entry, f"comparisons[{i}]", f"comparison-{i}")
            for i, entry in enumerate(comparisons)
        )
        labels = [controller.label] + [c.label for c in parsed_comparisons]
        if len(set(labels)) != len(labels):
            raise ScenarioValidationError("comparisons", f"labels must be unique, got {labels}")

        grid = raw.get("grid")
        if not isinstance(grid, dict):
            raise ScenarioValidationError("grid", "a grid table with a horizon is required")
        horizon = read_number(grid, "horizon", "grid.horizon")
        step = read_number(grid, "step", "grid.step") if "step" in grid else None
        if horizon <= 0:
            raise ScenarioValidationError("grid.horizon", "must be positive")
        if step is not None and not 0 < step <= horizon:
            raise ScenarioValidationError("grid.step", "must be positive and no longer than the horizon")

        actuator = None
        if "actuator" in raw:
            actuator = ActuatorLimits.from_dict(raw["actuator"], "actuator")

        sweeps = tuple(_parse_sweep(entry, f"sweeps[{i}]", raw) for i, entry in enumerate(raw.get("sweeps", [])))

        return cls(
            name=name,
            plant_kind=plant_kind,
            plant=plant,
            controller=controller,
            horizon=horizon,
            setpoint=Signal.from_dict(raw.get("setpoint", {}), "setpoint"),
            disturbance=Signal.from_dict(raw.get("disturbance", {}), "disturbance"),
            step=step,
            actuator=actuator,
            comparisons=parsed_comparisons,
            sweeps=sweeps,
            description=str(raw.get("description", "")),
            raw=raw,
        )

    def sweep_points(self) -> list[dict[str, Any]]:
        if not self.sweeps:
            return [{}]
        return [
            dict(zip((s.path for s in self.sweeps), combo))
            for combo in itertools.product(*(s.values for s in self.sweeps))
        ]

    def at_point(self, point: dict[str, Any]) -> Scenario:
        data = copy.deepcopy(self.raw)
        data.pop("sweeps", None)
        for path, value in point.items():
            _assign(data, path, value)
        return Scenario.from_dict(data)

    def with_sweep(self, path: str, values: list[Any]) -> Scenario:
        data = copy.deepcopy(self.raw)
        data["sweeps"] = [{"path": path, "values": list(values)}]
        return Scenario.from_dict(data)


def _normalise(data: dict) -> dict:
    raw = copy.deepcopy(data)
    controller = raw.get("controller")
    if isinstance(controller, dict) and controller.get("kind", "ipi") == "ipi":
        controller.setdefault("kind", "ipi")
        controller.setdefault("zeta", 0.7)
        controller.setdefault("k", 1.0)
    plant = raw.get("plant")
    if isinstance(plant, dict) and plant.get("kind") == "ipdt":
        plant.setdefault("d", 0.0)
    return raw


def _tokens(path: str) -> list[str | int]:
    if not PATH_SYNTAX.fullmatch(path):
        raise ValueError(path)
    return [int(index) if index else key for key, index in PATH_TOKEN.findall(path)]


def _resolve(data: Any, path: str) -> Any:
    node = data
    for token in _tokens(path):
        if isinstance(token, int):
            if not isinstance(node, list) or token >= len(node):
                raise KeyError(path)
        elif not isinstance(node, dict) or token not in node:
            raise KeyError(path)
        node = node[token]
    return node


def _assign(data: Any, path: str, value: Any) -> None:
    *parents, last = _tokens(path)
    node = data
    for token in parents:
        node = node[token]
    node[last] = value


def _parse_sweep(entry: Any, path: str, raw: dict) -> Sweep:
    if not isinstance(entry, dict):
        raise ScenarioValidationError(path, "expected a table with 'path' and 'values'")
    target = entry.get("path")
    values = entry.get("values")
    if not isinstance(target, str):
        raise ScenarioValidationError(f"{path}.path", "is required")
    if target.startswith("sweeps"):
        raise ScenarioValidationError(f"{path}.path", "cannot sweep the sweeps themselves")
    try:
        _resolve(raw, target)
    except (KeyError, ValueError):
        raise ScenarioValidationError(
            f"{path}.path", f"'{target}' does not resolve to a key of this scenario"
        ) from None
    if not isinstance(values, list) or not values:
        raise ScenarioValidationError(f"{path}.values", "expected a non-empty array")
    return Sweep(target, tuple(values))


def load_scenario(source: str | Path) -> Scenario:
    """Load a scenario from a TOML file or by bundled name."""
    path = Path(source)
    if path.is_file():
        data = load_toml(path)
        plant = data.get("plant")
        if isinstance(plant, dict):
            coefficients = plant.get("coefficients")
            if isinstance(coefficients, str) and coefficients != "builtin":
                resolved = (path.parent / coefficients).resolve()
                plant["coefficients"] = str(resolved)
    elif str(source) in bundled_scenario_names():
        data = load_bundled_toml("scenarios", f"{source}.toml")
    else:
        raise ConfigurationError(
            f"No scenario file or bundled scenario named '{source}' "
            f"(bundled: {', '.join(bundled_scenario_names())})"
        )
    return Scenario.from_dict(data)


@dataclass
class RunResult:
    scenario: str
    label: str
    sweep_point: dict[str, Any]
    trace: SimTrace
    metrics: StepMetrics
    gains: dict[str, float] | None = None
    tuning_model: dict[str, float] | None = None

    @property
    def flags(self) -> tuple[str, ...]:
        return self.metrics.flags

    @property
    def run_id(self) -> str:
        parts = [self.label]
        for path, value in self.sweep_point.items():
            name = re.sub(r"[^A-Za-z0-9_]+", "-", path).strip("-")
            parts.append(f"{name}={value}")
        return "__".join(re.sub(r"[^A-Za-z0-9_.=-]+", "-", part) for part in parts)

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "label": self.label,
            "sweep_point": self.sweep_point,
            "gains": self.gains,
            "tuning_model": self.tuning_model,
            "metrics": self.metrics.as_dict(),
            "flags": list(self.flags),
        }


@dataclass
class ScenarioResult:
    scenario: Scenario
    runs: list[RunResult]

    def run(self, label: str, **point: Any) -> RunResult:
        for result in self.runs:
            if result.label == label and all(result.sweep_point.get(k) == v for k, v in point.items()):
                return result
        raise KeyError((label, point))


def _build_process(scenario: Scenario) -> AbstractProcess:
    backend = import_process_class(scenario.plant_kind)
    return backend.from_config(scenario.plant, "plant")


def _tuning_model(scenario: Scenario, config: ControllerConfig) -> IpdtModel:
    tuning = config.tuning_model
    if tuning.source is ModelSource.EXPLICIT:
        return tuning.model
    if tuning.source is ModelSource.IDENTIFY:
        record = step_test(
            _build_process(scenario),
            tuning.step_amplitude,
            tuning.step_time,
            tuning.horizon,
            scenario.step,
        )
        return identify_ipdt(record).model
    model = _build_process(scenario).nominal_model()
    if model is None:
        raise ScenarioValidationError(
            "controller.model.source",
            f"plant kind '{scenario.plant_kind}' has no IPDT description; use 'identify' or 'explicit'",
        )
    return model


def _build_controller(
    scenario: Scenario, config: ControllerConfig, process: AbstractProcess
) -> tuple[AbstractController, dict | None, dict | None]:
    limits = scenario.actuator or process.actuator_limits()
    if config.kind is ControllerKind.IPI:
        model = _tuning_model(scenario, config)
        gains = pi_gains(model, config.spec)
        return (
            IpiController(gains, limits),
            {"kc": gains.kc, "ti": gains.ti},
            {"kp": model.kp, "d": model.d},
        )
    if config.kind is ControllerKind.PID:
        gains = config.pid
        return (
            PidController(gains, limits),
            {"kc": gains.kc, "ti": gains.ti, "td": gains.td, "n": gains.deriv_filter_n},
            None,
        )
    return ZeroController(), None, None


def _metrics_step_time(scenario: Scenario) -> float:
    time, amplitude = scenario.setpoint.step_change()
    if amplitude:
        return time
    return scenario.disturbance.step_change()[0]


def _run_point(scenario: Scenario, point: dict[str, Any]) -> list[RunResult]:
    configs = (scenario.controller, *scenario.comparisons)
    built = []
    for config in configs:
        process = _build_process(scenario)
        controller, gains, model = _build_controller(scenario, config, process)
        built.append((config, process, controller, gains, model))

    step = scenario.step
    if step is None:
        bounds = [default_step(process.dead_time()) for _, process, *_ in built]
        bounds += [c.preferred_step() for _, _, c, _, _ in built if c.preferred_step()]
        step = min(bounds)
        logger.debug(f"{scenario.name}: default step {step:g} s")
    grid = TimeGrid(step, scenario.horizon)

    scale = max(
        1.0,
        abs(scenario.setpoint.step_change()[1]),
        abs(scenario.setpoint.value(scenario.horizon)),
    )
    limit = ipdtsim_settings.DIVERGENCE_FACTOR * scale
    step_time = _metrics_step_time(scenario)

    results = []
    for config, process, controller, gains, model in built:
        trace = run_loop(process, controller, grid, scenario.setpoint, scenario.disturbance, limit)
        results.append(
            RunResult(
                scenario=scenario.name,
                label=config.label,
                sweep_point=dict(point),
                trace=trace,
                metrics=compute_metrics(trace, step_time),
                gains=gains,
                tuning_model=model,
            )
        )
    return results


def _run_sweep_point(args: tuple[Scenario, dict[str, Any]]) -> list[RunResult]:
    scenario, point = args
    return _run_point(scenario.at_point(point) if point else scenario, point)


def run_scenario(
    scenario: Scenario, output_dir: str | Path | None = None, workers: int = 1
) -> ScenarioResult:
    """Run every sweep point of ``scenario``; optionally write the outputs."""
    points = scenario.sweep_points()
    logger.info(f"Running scenario '{scenario.name}' ({len(points)} sweep point(s))")
    tasks = [(scenario, point) for point in points]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_sweep_point, tasks))
    else:
        batches = [_run_sweep_point(task) for task in tasks]
    result = ScenarioResult(scenario, [run for batch in batches for run in batch])
    logger.info(f"Scenario '{scenario.name}' finished with {len(result.runs)} run(s)")

    if output_dir is not None:
        from ipdtsim.outputs import emit_outputs

        emit_outputs(result, output_dir)
    return result


def run_directory(scenario: Scenario, root: str | Path | None = None) -> Path:
    return Path(root or ipdtsim_settings.OUTPUT_ROOT) / scenario.name


__all__ = [
    "ControllerConfig",
    "ControllerKind",
    "ModelSource",
    "RunResult",
    "Scenario",
    "ScenarioResult",
    "Sweep",
    "load_scenario",
    "run_directory",
    "run_scenario",
]
