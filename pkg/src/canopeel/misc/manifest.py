"""Run manifests: the record of configs, seed, artifacts and phase timings every command writes."""

import json
import os
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, NamedTuple

from canopeel import __version__
from canopeel.config import logger
from canopeel.misc.dataclasses import RunManifest
from canopeel.misc.exceptions import StorageError

__all__: tuple[str, ...] = ("PhaseTimer", "build_manifest", "load_manifest", "write_manifest")


class PhaseTimer:
    """Measures the wall time of the named phases of a command."""

    def __init__(self) -> None:
        self._phases: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        """
        Times the enclosed block, repeated names accumulate.

        :param name: Phase name.
        :return: Context manager.
        """
        started: float = time.perf_counter()
        try:
            yield
        finally:
            elapsed: float = time.perf_counter() - started
            self._phases[name] = self._phases.get(name, 0.0) + elapsed
            logger.debug(f"Phase '{name}' took {elapsed:.3f} s")

    @property
    def phases(self) -> dict[str, float]:
        """
        Returns the measured phases.

        :return: Phase name to seconds mapping.
        """
        return dict(self._phases)


def _jsonable(value: Any) -> Any:
    if isinstance(value, tuple) and hasattr(value, "_asdict"):
        return {key: _jsonable(item) for key, item in value._asdict().items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, Path):
        return str(value)
    return value


def build_manifest(
    command: str, seed: int, configs: dict[str, NamedTuple], artifacts: dict[str, Any], timer: PhaseTimer
) -> RunManifest:
    """
    Collects the run record.

    :param command: Subcommand name.
    :param seed: Seed of the run.
    :param configs: Config records by name, inlined.
    :param artifacts: Artifact name to path or value mapping.
    :param timer: Phase timer of the run.
    :return: RunManifest.
    """
    return RunManifest(
        command=command,
        seed=seed,
        config={name: _jsonable(record) for name, record in configs.items()},
        artifacts={name: _jsonable(value) for name, value in artifacts.items()},
        version=__version__,
        phases=timer.phases,
    )


def write_manifest(path: Path, manifest: RunManifest) -> None:
    """
    Writes the manifest atomically through a temporary file.

    :param path: Output file.
    :param manifest: Manifest.
    :raises StorageError: if the file cannot be written.
    """
    target: Path = Path(path)
    tmp: Path = target.with_name(target.name + ".tmp")
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, target)
    except OSError as exc:
        raise StorageError(f"Cannot write manifest {target}: {exc}") from exc
    logger.debug(f"Wrote manifest {target}")


def load_manifest(path: Path) -> RunManifest:
    """
    Reads a manifest written by write_manifest.

    :param path: Manifest file.
    :return: RunManifest.
    :raises StorageError: if the file cannot be read or lacks fields.
    """
    try:
        data: dict[str, Any] = json.loads(Path(path).read_text(encoding="utf-8"))
        return RunManifest(**{name: data[name] for name in RunManifest._fields})
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise StorageError(f"Cannot read manifest {path}: {exc}") from exc
