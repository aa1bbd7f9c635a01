import json
import tempfile

from pathlib import Path
from unittest import TestCase

import numpy as np

from ipdtsim.base import ConfigurationError
from ipdtsim.control import ZeroController
from ipdtsim.dynamics import TRACE_COLUMNS, Signal, TimeGrid, run_loop
from ipdtsim.outputs import (
    PLOT_NAME,
    REPORT_NAME,
    OutputError,
    emit_outputs,
    read_trace_csv,
    trace_to_csv,
    write_trace_csv,
)
from ipdtsim.processes.auv import AuvDepthProcess
from ipdtsim.scenarios import Scenario, run_scenario

from .utils import make_trace, scenario_dict


class TraceCsvTest(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_header_and_rows(self):
        trace = make_trace([0.0, 0.1], [0.0, 0.25], u=[1.0, 0.5])
        lines = trace_to_csv(trace).splitlines()
        self.assertEqual(lines[0], ",".join(TRACE_COLUMNS))
        self.assertEqual(lines[2], "0.1,1.0,0.0,0.0,0.5,0.5,0.25")
        self.assertEqual(len(lines), 3)

    def test_written_trace_reads_back_exactly(self):
        trace = run_loop(
            AuvDepthProcess.from_config({}),
            ZeroController(),
            TimeGrid(0.05, 5.0),
            Signal.constant(0.0),
            Signal.step(0.1, 1.0),
        )
        path = write_trace_csv(trace, self.root / "auv.csv")
        restored = read_trace_csv(path)
        self.assertTrue(restored.equals(trace))
        self.assertEqual(restored.columns[-1], "stern")

    def test_malformed_files(self):
        header = ",".join(TRACE_COLUMNS)
        cases = {
            "empty.csv": "",
            "header.csv": "time,y\n0,1\n",
            "no-rows.csv": header + "\n",
            "text.csv": header + "\n0,1,0,0,0,0,x\n",
            "short.csv": header + "\n0,1,0,0,0,0\n",
        }
        for name, text in cases.items():
            with self.subTest(name=name):
                path = self.root / name
                path.write_text(text, encoding="utf-8")
                with self.assertRaises(ConfigurationError):
                    read_trace_csv(path)

    def test_missing_file(self):
        with self.assertRaises(OutputError):
            read_trace_csv(self.root / "missing.csv")


class EmitOutputsTest(TestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        sweeps = [{"path": "controller.zeta", "values": [0.6, 0.7, 0.8]}]
        cls.result = run_scenario(Scenario.from_dict(scenario_dict(sweeps=sweeps)))

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def test_run_directory_layout(self):
        written = emit_outputs(self.result, self.root / "run")
        names = sorted(path.name for path in written)
        self.assertEqual(
            names,
            sorted(
                [
                    "main__controller-zeta=0.6.csv",
                    "main__controller-zeta=0.7.csv",
                    "main__controller-zeta=0.8.csv",
                    REPORT_NAME,
                    PLOT_NAME,
                ]
            ),
        )
        self.assertTrue(all(path.is_file() for path in written))

    def test_report(self):
        emit_outputs(self.result, self.root)
        report = json.loads((self.root / REPORT_NAME).read_text(encoding="utf-8"))
        self.assertEqual(report["scenario"], "unit-test")
        self.assertEqual(len(report["runs"]), 3)
        run = report["runs"][0]
        self.assertEqual(run["sweep_point"], {"controller.zeta": 0.6})
        self.assertEqual(set(run["gains"]), {"kc", "ti"})
        self.assertIn("overshoot_pct", run["metrics"])
        self.assertEqual(run["flags"], [])

    def test_plot_is_svg(self):
        emit_outputs(self.result, self.root)
        text = (self.root / PLOT_NAME).read_text(encoding="utf-8")
        self.assertIn("<svg", text)

    def test_emission_is_byte_identical(self):
        first = {path.name: path.read_bytes() for path in emit_outputs(self.result, self.root / "a")}
        second = {path.name: path.read_bytes() for path in emit_outputs(self.result, self.root / "b")}
        self.assertEqual(first, second)

    def test_unwritable_directory(self):
        blocker = self.root / "file"
        blocker.write_text("", encoding="utf-8")
        with self.assertRaises(OutputError):
            emit_outputs(self.result, blocker / "run")

    def test_csv_matches_the_trace(self):
        emit_outputs(self.result, self.root)
        run = self.result.runs[1]
        restored = read_trace_csv(self.root / f"{run.run_id}.csv")
        np.testing.assert_array_equal(restored.y, run.trace.y)
