"""Setting up the configuration for the application."""

import json
import os
import sys
from pathlib import Path
from typing import Any, NamedTuple, TypeVar

from environs import Env, EnvError
from loguru import logger as _logger

# noinspection PyProtectedMember
from loguru._logger import Logger

from canopeel.misc.dataclasses import Paths
from canopeel.misc.exceptions import InputError, StorageError

__all__: tuple[str, ...] = ("Config", "Logging", "load_json_config", "logger", "override_config")


_DEBUG: bool = False  # Overridden by CANOPEEL_DEBUG
_BASE_DIR: Path = Path(__file__).resolve().parent  # Path settings

_ConfigT = TypeVar("_ConfigT", bound=NamedTuple)


# region Logging
class Logging:
    """Performs logging settings in the application."""

    def __init__(self, debug: bool = _DEBUG, log_dir: Path | None = None) -> None:
        """
        Initialization of necessary parameters.

        :param debug: True, if debugging mode is enabled, otherwise False.
        :param log_dir: Directory for the log file, no file sink when None.
        """
        _time: str = "<green>{time:%Y-%m-%d %H:%M:%S}</green>"
        _level: str = "<level>{level: <8}</level>"
        _for_debug: str = "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | " if debug else ""
        _msg: str = "<level>{message}</level>"
        _logger.remove()
        _log_level: str = "DEBUG" if debug else "INFO"
        _format: str = f"{_time} | {_level} | {_for_debug}{_msg}"
        _logger.add(sink=sys.stderr, level=_log_level, format=_format, colorize=True)
        if log_dir is not None:
            log_dir.mkdir(parents=True, exist_ok=True)
            _logger.add(sink=Path(log_dir, "canopeel.log"), level=_log_level, format=_format, encoding="utf-8")
        self._log: Logger = _logger  # type: ignore

    @property
    def logger(self) -> Logger:
        """
        Returns the Logger object.

        :return: Logger object.
        """
        return self._log


logger: Logger = Logging().logger


# endregion


# region Config
class Config:
    """Reads ambient settings from the optional .env file and the process environment."""

    def __init__(self, base_dir: Path = _BASE_DIR, debug: bool | None = None) -> None:
        """
        Initializing a class, the .env file is read when it exists.

        :param base_dir: Path to the base directory of the application.
        :param debug: Forces the debug mode, read from CANOPEEL_DEBUG when None.
        :raises EnvError: if a setting has an invalid value.
        """
        self._env_path: Path = Path(base_dir, "../.env")
        self._env: Env = Env()
        if self._env_path.exists():
            self._env.read_env(path=str(self._env_path), recurse=False)
        self._debug: bool = self._get_debug() if debug is None else debug
        if not self._debug:
            sys.tracebacklimit = 0
        self._paths: Paths = self._get_paths(base_dir=base_dir)
        self._threads: int = self._get_threads()

    def _get_debug(self) -> bool:
        """
        Returns the debug flag.

        :return: True, if debugging mode is enabled.
        :raises EnvError: if the value is not a boolean.
        """
        try:
            return self._env.bool("CANOPEEL_DEBUG", _DEBUG)
        except EnvError as exc:
            raise EnvError(f"CANOPEEL_DEBUG has an invalid value: {repr(exc)}") from exc

    @property
    def debug(self) -> bool:
        """
        Returns the debug flag.

        :return: True, if debugging mode is enabled.
        """
        return self._debug

    def _get_paths(self, base_dir: Path) -> Paths:
        """
        Returns the paths to the folders used in the program.

        :param base_dir: Path to the base directory of the application.
        :return: Paths object.
        :raises EnvError: if a path setting is invalid.
        """
        try:
            logs: Path = self._env.path("CANOPEEL_LOG_DIR", Path(base_dir, "../../logs"))
            tmpl: Path = self._env.path("CANOPEEL_TEMPLATES", Path(base_dir, "templates"))
        except EnvError as exc:
            raise EnvError(f"Path settings are invalid: {repr(exc)}") from exc
        return Paths(logs=Path(logs), tmpl=Path(tmpl))

    @property
    def paths(self) -> Paths:
        """
        Returns the paths to the folders used in the program.

        :return: Paths object.
        """
        return self._paths

    def _get_threads(self) -> int:
        """
        Returns the default worker count.

        :return: Number of worker threads, at least 1.
        :raises EnvError: if the value is not a positive integer.
        """
        try:
            threads: int = self._env.int("CANOPEEL_THREADS", os.cpu_count() or 1)
        except EnvError as exc:
            raise EnvError(f"CANOPEEL_THREADS has an invalid value: {repr(exc)}") from exc
        if threads < 1:
            raise EnvError(f"CANOPEEL_THREADS must be positive, got {threads}")
        return threads

    @property
    def threads(self) -> int:
        """
        Returns the default worker count.

        :return: Number of worker threads.
        """
        return self._threads


# endregion


# region JSON configs
def _coerce(value: Any, default: Any, key: str) -> Any:
    """
    Converts a JSON or command line value to the type of the field default.

    :param value: Raw value.
    :param default: Field default, defines the target type.
    :param key: Field name, used in error messages.
    :return: Converted value.
    :raises InputError: if the value cannot be converted.
    """
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return value.lower() in ("true", "1", "yes")
            return bool(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            items: Any = json.loads(value) if isinstance(value, str) else value
            return tuple(_coerce(v, default[0], key) if default else v for v in items)
        if default is None and isinstance(value, str):
            try:
                return json.loads(value)
            except json.JSONDecodeError:
                return value
        return type(default)(value) if default is not None else value
    except (TypeError, ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"Invalid value for '{key}': {value!r}") from exc


def override_config(config: _ConfigT, overrides: dict[str, Any]) -> _ConfigT:
    """
    Returns a copy of the config record with the given fields replaced.

    :param config: Config record.
    :param overrides: Field name to raw value mapping.
    :return: Updated config record.
    :raises InputError: if a key is not a field of the record.
    """
    defaults: dict[str, Any] = config._asdict()
    unknown: list[str] = sorted(set(overrides) - set(defaults))
    if unknown:
        raise InputError(f"Unknown {type(config).__name__} keys: {', '.join(unknown)}")
    values: dict[str, Any] = {key: _coerce(value, defaults[key], key) for key, value in overrides.items()}
    return config._replace(**values)


def load_json_config(cls: type[_ConfigT], path: Path | None, overrides: dict[str, Any] | None = None) -> _ConfigT:
    """
    Reads a config record from a JSON file and applies command line overrides.

    :param cls: Config record class.
    :param path: JSON file, only defaults are used when None.
    :param overrides: Flat overrides applied after the file.
    :return: Config record.
    :raises StorageError: if the file cannot be read or parsed.
    :raises InputError: if the file contains unknown keys or invalid values.
    """
    config: _ConfigT = cls()
    if path is not None:
        try:
            data: Any = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StorageError(f"Cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError(f"Config {path} must contain a JSON object")
        config = override_config(config=config, overrides=data)
    return override_config(config=config, overrides=overrides or {})


# endregion
