import tempfile

from pathlib import Path
from unittest import TestCase

import numpy as np

from ipdtsim.base import ConfigurationError, ScenarioValidationError
from ipdtsim.scenarios import (
    ControllerKind,
    ModelSource,
    RunResult,
    Scenario,
    load_scenario,
    run_directory,
    run_scenario,
)
from ipdtsim.utils import bundled_scenario_names

from .utils import override_settings, scenario_dict


class ScenarioParsingTest(TestCase):
    def test_defaults_are_filled_in(self):
        controller = {"kind": "ipi", "omega_n": 0.5}
        scenario = Scenario.from_dict(scenario_dict(controller=controller))
        self.assertIs(scenario.controller.kind, ControllerKind.IPI)
        self.assertEqual(scenario.controller.spec.zeta, 0.7)
        self.assertEqual(scenario.controller.spec.k, 1.0)
        self.assertIs(scenario.controller.tuning_model.source, ModelSource.PLANT)
        self.assertEqual(scenario.controller.label, "main")
        self.assertEqual(scenario.raw["controller"]["zeta"], 0.7)

    def test_comparisons(self):
        comparisons = [{"kind": "pid", "label": "pid", "kc": 1.0, "ti": 10.0, "td": 1.0}, {"kind": "none"}]
        scenario = Scenario.from_dict(scenario_dict(comparisons=comparisons))
        self.assertEqual([c.label for c in scenario.comparisons], ["pid", "comparison-1"])
        self.assertEqual(scenario.comparisons[0].pid.deriv_filter_n, 10.0)
        self.assertIs(scenario.comparisons[1].kind, ControllerKind.NONE)

    def test_validation_errors_name_the_path(self):
        cases = [
            (scenario_dict(plants={}), "plants"),
            (scenario_dict(name=None), "name"),
            (scenario_dict(plant=None), "plant"),
            (scenario_dict(grid={"step": 0.1}), "grid.horizon"),
            (scenario_dict(grid={"horizon": 1.0, "step": 2.0}), "grid.step"),
            (scenario_dict(controller={"kind": "lqr"}), "controller.kind"),
            (scenario_dict(controller={"kind": "ipi", "zeta": -0.7}), "controller.zeta"),
            (scenario_dict(controller={"kind": "ipi", "label": "a b"}), "controller.label"),
            (scenario_dict(controller={"kind": "ipi", "model": {"source": "guess"}}), "controller.model.source"),
            (scenario_dict(controller={"kind": "ipi", "model": {"source": "explicit"}}), "controller.model.kp"),
            (scenario_dict(comparisons=[{"kind": "pid", "ti": 10.0}]), "comparisons[0].kc"),
            (scenario_dict(comparisons=[{"kind": "pid", "kc": 1.0, "ti": 0.0}]), "comparisons[0]"),
            (scenario_dict(comparisons=[{"kind": "none", "label": "main"}]), "comparisons"),
            (scenario_dict(setpoint={"kind": "square"}), "setpoint.kind"),
            (scenario_dict(actuator={"max_rate": -1.0}), "actuator.max_rate"),
            (scenario_dict(sweeps=[{"path": "plant.tau", "values": [1]}]), "sweeps[0].path"),
            (scenario_dict(sweeps=[{"path": "plant.kp", "values": []}]), "sweeps[0].values"),
            (scenario_dict(sweeps=[{"path": "plant..kp", "values": [1]}]), "sweeps[0].path"),
        ]
        for data, path in cases:
            with self.subTest(path=path):
                with self.assertRaises(ScenarioValidationError) as ctx:
                    Scenario.from_dict(data)
                self.assertEqual(ctx.exception.path, path)

    def test_sweep_points_are_a_cartesian_product(self):
        sweeps = [
            {"path": "controller.zeta", "values": [0.6, 0.8]},
            {"path": "plant.d", "values": [0.2, 0.4, 0.6]},
        ]
        scenario = Scenario.from_dict(scenario_dict(sweeps=sweeps))
        points = scenario.sweep_points()
        self.assertEqual(len(points), 6)
        self.assertEqual(points[0], {"controller.zeta": 0.6, "plant.d": 0.2})
        self.assertEqual(points[-1], {"controller.zeta": 0.8, "plant.d": 0.6})
        self.assertEqual(Scenario.from_dict(scenario_dict()).sweep_points(), [{}])

    def test_at_point(self):
        scenario = Scenario.from_dict(scenario_dict(sweeps=[{"path": "controller.zeta", "values": [0.6, 0.8]}]))
        point = scenario.at_point({"controller.zeta": 0.8})
        self.assertEqual(point.controller.spec.zeta, 0.8)
        self.assertEqual(point.sweeps, ())
        self.assertEqual(scenario.controller.spec.zeta, 0.7)

    def test_sweep_into_a_comparison(self):
        comparisons = [{"kind": "pid", "label": "pid", "kc": 1.0, "ti": 10.0}]
        scenario = Scenario.from_dict(scenario_dict(comparisons=comparisons))
        swept = scenario.with_sweep("comparisons[0].kc", [0.5, 2.0])
        self.assertEqual(swept.at_point({"comparisons[0].kc": 2.0}).comparisons[0].pid.kc, 2.0)


class LoadScenarioTest(TestCase):
    def test_every_bundled_scenario_parses(self):
        for name in bundled_scenario_names():
            with self.subTest(name=name):
                self.assertEqual(load_scenario(name).name, name)

    def test_bundled_details(self):
        self.assertEqual(len(load_scenario("eq13-tracking").comparisons), 2)
        self.assertEqual(len(load_scenario("zeta-sweep").sweep_points()), 3)
        auv = load_scenario("auv-depth")
        self.assertIs(auv.controller.tuning_model.source, ModelSource.IDENTIFY)
        self.assertEqual(auv.controller.tuning_model.step_amplitude, 0.03491)

    def test_unknown_name(self):
        with self.assertRaisesRegex(ConfigurationError, "eq13-tracking"):
            load_scenario("no-such-scenario")

    def test_relative_coefficients_path(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            (root / "vehicle.toml").write_text("mass_heave = 60.0\n", encoding="utf-8")
            (root / "dive.toml").write_text(
                'name = "dive"\n'
                '[plant]\nkind = "auv"\ncoefficients = "vehicle.toml"\n'
                '[controller]\nkind = "none"\n'
                "[grid]\nhorizon = 10.0\n",
                encoding="utf-8",
            )
            scenario = load_scenario(root / "dive.toml")
            self.assertEqual(Path(scenario.plant["coefficients"]), (root / "vehicle.toml").resolve())

    def test_syntax_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "broken.toml"
            path.write_text("name = \n", encoding="utf-8")
            with self.assertRaises(ConfigurationError):
                load_scenario(path)


class RunScenarioTest(TestCase):
    def test_base_scenario_tracks_the_setpoint(self):
        result = run_scenario(Scenario.from_dict(scenario_dict()))
        run = result.run("main")
        self.assertEqual(len(run.trace), 801)
        self.assertAlmostEqual(run.trace.y[-1], 1.0, delta=0.01)
        self.assertTrue(run.metrics.settled)
        self.assertAlmostEqual(run.gains["kc"], 0.7)
        self.assertEqual(run.tuning_model, {"kp": 1.0, "d": 0.5})

    def test_default_step_follows_the_dead_time(self):
        result = run_scenario(Scenario.from_dict(scenario_dict(grid={"horizon": 10.0})))
        self.assertAlmostEqual(result.runs[0].trace.step_h, 0.025)

    def test_run_ids(self):
        run = RunResult("s", "ipi", {"controller.zeta": 0.4, "comparisons[0].kc": 2}, None, None)
        self.assertEqual(run.run_id, "ipi__controller-zeta=0.4__comparisons-0-kc=2")

    def test_eq13_tracking(self):
        result = run_scenario(load_scenario("eq13-tracking"))
        self.assertEqual([run.label for run in result.runs], ["ipi", "pid-a", "pid-b"])
        ipi = result.run("ipi")
        self.assertAlmostEqual(ipi.gains["kc"], 1.2691, places=3)
        self.assertAlmostEqual(ipi.trace.y[-1], 1.0, delta=0.01)
        self.assertTrue(ipi.metrics.settled)
        self.assertGreater(ipi.metrics.overshoot_pct, 0.0)
        for label in ("pid-a", "pid-b"):
            with self.subTest(label=label):
                self.assertAlmostEqual(result.run(label).trace.y[-1], 1.0, delta=0.02)

    def test_ipi_control_action_is_smoother_than_pid(self):
        result = run_scenario(load_scenario("eq13-tracking"))
        ipi_step = result.run("ipi").metrics.max_control_step
        for label in ("pid-a", "pid-b"):
            with self.subTest(label=label):
                self.assertLess(ipi_step, result.run(label).metrics.max_control_step)

    def test_eq13_regulation(self):
        result = run_scenario(load_scenario("eq13-regulation"))
        ipi = result.run("ipi")
        self.assertIn("regulation", ipi.flags)
        self.assertTrue(ipi.metrics.settled)
        self.assertGreater(np.max(ipi.trace.y), 0.1)
        self.assertLess(abs(ipi.trace.y[-1]), 1e-3)

    def test_damping_reduces_overshoot(self):
        result = run_scenario(load_scenario("zeta-sweep"))
        overshoot = [result.run("ipi", **{"controller.zeta": z}).metrics.overshoot_pct for z in (0.4, 0.7, 1.0)]
        self.assertGreater(overshoot[0], overshoot[1])
        self.assertGreater(overshoot[1], overshoot[2])

    def test_aggressiveness_increases_overshoot(self):
        result = run_scenario(load_scenario("k-sweep"))
        runs = [result.run("ipi", **{"controller.k": k}) for k in (0.5, 1.0, 1.5)]
        overshoot = [run.metrics.overshoot_pct for run in runs]
        for run in runs:
            with self.subTest(k=run.sweep_point["controller.k"]):
                self.assertFalse(run.trace.diverged)
                self.assertTrue(run.metrics.settled)
                self.assertGreaterEqual(run.metrics.overshoot_pct, 4.0)
                self.assertLessEqual(run.metrics.overshoot_pct, 25.0)
        self.assertLess(overshoot[0], overshoot[1])
        self.assertLess(overshoot[1], overshoot[2])

    def test_auv_depth_change(self):
        result = run_scenario(load_scenario("auv-depth"))
        run = result.run("ipi")
        self.assertAlmostEqual(run.trace.y[-1], 5.0, delta=0.05)
        self.assertLessEqual(np.max(np.abs(run.trace.auxiliary["stern"])), 0.4)
        self.assertAlmostEqual(run.tuning_model["kp"], 0.7918, delta=0.2 * 0.7918)
        self.assertTrue(run.metrics.settled)
        self.assertLess(run.metrics.overshoot_pct, 15.0)

    def test_deadtime_robustness(self):
        result = run_scenario(load_scenario("deadtime-robustness"))
        runs = [result.run("ipi", **{"plant.d": d}) for d in (3.0, 6.0, 9.0)]
        for run in runs:
            with self.subTest(d=run.sweep_point["plant.d"]):
                self.assertFalse(run.trace.diverged)
                self.assertTrue(run.metrics.settled)
                self.assertAlmostEqual(run.trace.y[-1], 1.0, delta=0.01)
                self.assertEqual(run.gains, runs[0].gains)
        self.assertGreater(runs[2].metrics.overshoot_pct, runs[1].metrics.overshoot_pct)

    def test_auv_needs_an_identified_model(self):
        data = scenario_dict(plant={"kind": "auv"})
        with self.assertRaises(ScenarioValidationError) as ctx:
            run_scenario(Scenario.from_dict(data))
        self.assertEqual(ctx.exception.path, "controller.model.source")

    def test_parallel_sweep_matches_serial(self):
        scenario = Scenario.from_dict(
            scenario_dict(sweeps=[{"path": "controller.zeta", "values": [0.6, 0.8]}])
        )
        serial = run_scenario(scenario)
        parallel = run_scenario(scenario, workers=2)
        self.assertEqual(len(parallel.runs), 2)
        for a, b in zip(serial.runs, parallel.runs):
            self.assertEqual(a.sweep_point, b.sweep_point)
            self.assertTrue(a.trace.equals(b.trace))

    def test_run_directory(self):
        scenario = Scenario.from_dict(scenario_dict())
        self.assertEqual(run_directory(scenario, "out"), Path("out") / "unit-test")
        with override_settings(OUTPUT_ROOT="elsewhere"):
            self.assertEqual(run_directory(scenario), Path("elsewhere") / "unit-test")
