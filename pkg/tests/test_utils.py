import tempfile

from pathlib import Path
from unittest import TestCase, mock

from ipdtsim.base import ConfigurationError
from ipdtsim.processes.auv import AuvDepthProcess
from ipdtsim.processes.ipdt import IpdtProcess
from ipdtsim.utils import (
    bundled_scenario_names,
    import_process_class,
    load_bundled_toml,
    load_toml,
)

from .utils import FirstOrderProcess


class TomlLoadingTest(TestCase):
    def test_load_toml(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "plant.toml"
            path.write_text('kind = "ipdt"\nkp = 0.5\n', encoding="utf-8")
            self.assertEqual(load_toml(path), {"kind": "ipdt", "kp": 0.5})

    def test_load_toml_syntax_error_names_the_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "broken.toml"
            path.write_text("kp = = 1\n", encoding="utf-8")
            with self.assertRaisesRegex(ConfigurationError, "broken.toml"):
                load_toml(path)

    def test_bundled_coefficients(self):
        data = load_bundled_toml("auv_depth.toml")
        self.assertEqual(data["m_delta"], -55.5)
        self.assertEqual(data["max_deflection"], 0.4)

    def test_missing_bundled_file(self):
        with self.assertRaisesRegex(ConfigurationError, "No bundled data file 'scenarios/nope.toml'"):
            load_bundled_toml("scenarios", "nope.toml")

    def test_bundled_scenario_names(self):
        self.assertEqual(
            bundled_scenario_names(),
            [
                "auv-depth",
                "auv-step-test",
                "deadtime-robustness",
                "eq13-regulation",
                "eq13-tracking",
                "k-sweep",
                "zeta-sweep",
            ],
        )


class ProcessBackendImportTest(TestCase):
    def test_short_names(self):
        self.assertIs(import_process_class("ipdt"), IpdtProcess)
        self.assertIs(import_process_class("auv"), AuvDepthProcess)

    def test_dotted_path(self):
        self.assertIs(import_process_class("tests.utils.FirstOrderProcess"), FirstOrderProcess)

    def test_import_process_class_success(self):
        with mock.patch("ipdtsim.utils.importlib.import_module") as mock_import_module:

            class DummyModule:
                DummyProcess = FirstOrderProcess

            mock_import_module.return_value = DummyModule
            self.assertIs(import_process_class("dummy.module.DummyProcess"), FirstOrderProcess)
            mock_import_module.assert_called_once_with("dummy.module")

    def test_import_process_class_failure(self):
        with self.assertRaisesRegex(
            ConfigurationError, "Failed to import process backend 'not.a.real.Backend'"
        ):
            import_process_class("not.a.real.Backend")

    def test_not_a_module_path(self):
        with self.assertRaises(ConfigurationError):
            import_process_class("ipdtx")

    def test_not_a_process(self):
        with self.assertRaisesRegex(ConfigurationError, "is not an AbstractProcess subclass"):
            import_process_class("ipdtsim.control.PiGains")
