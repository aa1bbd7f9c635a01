"""Command-line entry point: ``ipdtsim <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

from ipdtsim import __version__
from ipdtsim.base import ConfigurationError, SimulationError
from ipdtsim.diagnostics import IpdtsimWarning
from ipdtsim.experiments import BENCHMARK_MODEL, aggressiveness_limits, calibrate
from ipdtsim.identification import StepTestRecord, identify_ipdt
from ipdtsim.outputs import read_trace_csv
from ipdtsim.processes.ipdt import IpdtModel
from ipdtsim.scenarios import load_scenario, run_directory, run_scenario
from ipdtsim.settings import ipdtsim_settings
from ipdtsim.tuning import TuningSpec, tune
from ipdtsim.utils import bundled_scenario_names


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FILESYSTEM = 1
EXIT_CONFIGURATION = 2
EXIT_SIMULATION = 3


def _value(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _value_list(text: str) -> list:
    values = [_value(part) for part in text.split(",") if part.strip()]
    if not values:
        raise argparse.ArgumentTypeError("expected a comma-separated list of values")
    return values


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _print_json(document: dict) -> None:
    print(json.dumps(document, indent=2, sort_keys=True, allow_nan=False))


def _run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.command == "sweep":
        scenario = scenario.with_sweep(args.param, args.values)
    run_dir = run_directory(scenario, args.output_dir)
    run_scenario(scenario, run_dir, workers=args.workers)
    print(run_dir)
    return EXIT_OK


def _tune(args) -> int:
    model = IpdtModel(args.kp, args.d)
    report = tune(model, TuningSpec(args.zeta, args.k, args.omega_n))
    _print_json({"model": {"kp": model.kp, "d": model.d}, **report.as_dict()})
    return EXIT_OK


def _identify(args) -> int:
    trace = read_trace_csv(args.trace)
    result = identify_ipdt(StepTestRecord(trace, args.step_amplitude, args.step_time))
    _print_json(result.as_dict())
    return EXIT_OK


def _stability(args) -> int:
    limits = aggressiveness_limits(
        IpdtModel(args.kp, args.d), args.zeta, args.k_values, args.horizon, args.step
    )
    _print_json(limits.as_dict())
    return EXIT_OK


def _calibrate(args) -> int:
    result = calibrate(
        IpdtModel(args.kp, args.d), args.zetas, args.k_values, horizon=args.horizon, step=args.step
    )
    _print_json(result.as_dict())
    return EXIT_OK


def _scenarios(args) -> int:
    for name in bundled_scenario_names():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipdtsim",
        description="Tune, identify and simulate I+PI control of integrating processes with dead time.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a scenario file or bundled scenario")
    sweep = commands.add_parser("sweep", help="run a scenario over a list of parameter values")
    for sub in (run, sweep):
        sub.add_argument("scenario", help="path to a scenario TOML file or a bundled scenario name")
        sub.add_argument(
            "--output-dir",
            default=None,
            help="root of the run directories (default: $IPDTSIM_OUTPUT_ROOT or 'runs')",
        )
        sub.add_argument("--workers", type=int, default=1, help="sweep points run in parallel")
        sub.set_defaults(handler=_run)
    sweep.add_argument("--param", required=True, help="dotted scenario path, e.g. controller.zeta")
    sweep.add_argument("--values", required=True, type=_value_list, help="comma-separated values")

    tune_cmd = commands.add_parser("tune", help="PI gains for an IPDT model")
    tune_cmd.add_argument("--kp", type=float, required=True)
    tune_cmd.add_argument("--d", type=float, required=True)
    tune_cmd.add_argument("--zeta", type=float, default=0.7)
    tune_cmd.add_argument("--k", type=float, default=1.0)
    tune_cmd.add_argument("--omega-n", type=float, default=None)
    tune_cmd.set_defaults(handler=_tune)

    identify = commands.add_parser("identify", help="fit an IPDT model to a step-test CSV trace")
    identify.add_argument("trace", help="CSV trace written by 'run'")
    identify.add_argument("--step-amplitude", type=float, required=True)
    identify.add_argument("--step-time", type=float, default=0.0)
    identify.set_defaults(handler=_identify)

    stability = commands.add_parser("stability", help="k at which the loop loses margin and diverges")
    stability.add_argument("--kp", type=float, default=BENCHMARK_MODEL.kp)
    stability.add_argument("--d", type=float, default=BENCHMARK_MODEL.d)
    stability.add_argument("--zeta", type=float, default=0.7)
    stability.add_argument("--k-values", type=_float_list, default=[0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0])
    stability.add_argument("--horizon", type=float, default=None)
    stability.add_argument("--step", type=float, default=None)
    stability.set_defaults(handler=_stability)

    calibrate_cmd = commands.add_parser(
        "calibrate", help="(zeta, k) closest to the reference step metrics"
    )
    calibrate_cmd.add_argument("--kp", type=float, default=BENCHMARK_MODEL.kp)
    calibrate_cmd.add_argument("--d", type=float, default=BENCHMARK_MODEL.d)
    calibrate_cmd.add_argument("--zetas", type=_float_list, default=[0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    calibrate_cmd.add_argument("--k-values", type=_float_list, default=[0.5, 0.75, 1.0, 1.25, 1.5])
    calibrate_cmd.add_argument("--horizon", type=float, default=None)
    calibrate_cmd.add_argument("--step", type=float, default=None)
    calibrate_cmd.set_defaults(handler=_calibrate)

    listing = commands.add_parser("scenarios", help="list the bundled scenarios")
    listing.set_defaults(handler=_scenarios)
    return parser


def _configure_logging(verbosity: int) -> None:
    if verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = getattr(logging, str(ipdtsim_settings.LOG_LEVEL).upper(), None)
        if not isinstance(level, int):
            level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        with warnings.catch_warnings():
            # diagnostics are already mirrored to the loggers
            warnings.simplefilter("ignore", IpdtsimWarning)
            return args.handler(args)
    except ConfigurationError as err:
        print(f"ipdtsim: error: {err}", file=sys.stderr)
        return EXIT_CONFIGURATION
    except SimulationError as err:
        logger.error(f"Simulation failed: {err}")
        print(f"ipdtsim: simulation error: {err}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as err:
        print(f"ipdtsim: error: {err}", file=sys.stderr)
        return EXIT_FILESYSTEM
