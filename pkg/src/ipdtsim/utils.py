from __future__ import annotations

import importlib

from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING

from ipdtsim.base import ConfigurationError


try:
    import tomllib
except ImportError:
    import tomli as tomllib


if TYPE_CHECKING:
    from ipdtsim.base import AbstractProcess

DATA_PACKAGE = "ipdtsim.data"


def load_toml(path: str | Path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fp:
            return tomllib.load(fp)
    except tomllib.TOMLDecodeError as err:
        raise ConfigurationError(f"Failed to parse '{path}': {err}") from err


def load_bundled_toml(*parts: str) -> dict:
    resource = resources.files(DATA_PACKAGE)
    for part in parts:
        resource = resource.joinpath(part)
    try:
        return tomllib.loads(resource.read_text(encoding="utf-8"))
    except FileNotFoundError as err:
        raise ConfigurationError(f"No bundled data file '{'/'.join(parts)}'") from err


def bundled_scenario_names() -> list[str]:
    directory = resources.files(DATA_PACKAGE).joinpath("scenarios")
    return sorted(
        entry.name.removesuffix(".toml")
        for entry in directory.iterdir()
        if entry.name.endswith(".toml")
    )


PLANT_BACKENDS: dict[str, str] = {
    "ipdt": "ipdtsim.processes.ipdt.IpdtProcess",
    "auv": "ipdtsim.processes.auv.AuvDepthProcess",
}


def import_process_class(backend_path: str) -> type[AbstractProcess]:
    from ipdtsim.base import AbstractProcess

    backend_path = PLANT_BACKENDS.get(backend_path, backend_path)
    try:
        module_path, class_name = backend_path.rsplit(".", 1)
        module = importlib.import_module(module_path)
        backend = getattr(module, class_name)
    except (ValueError, ModuleNotFoundError, AttributeError) as err:
        raise ConfigurationError(
            f"Failed to import process backend '{backend_path}': {err}"
        ) from err
    if not (isinstance(backend, type) and issubclass(backend, AbstractProcess)):
        raise ConfigurationError(
            f"Process backend '{backend_path}' is not an AbstractProcess subclass"
        )
    return backend
