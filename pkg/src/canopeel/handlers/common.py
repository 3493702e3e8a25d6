"""This module contains the base class of the command handlers and their shared helpers."""

from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Any, NamedTuple, TypeVar

from canopeel.config import Config, load_json_config, logger
from canopeel.misc.exceptions import InputError, StorageError
from canopeel.misc.manifest import PhaseTimer, build_manifest, write_manifest
from canopeel.misc.tmpl_render import TmplRender

__all__: tuple[str, ...] = ("BaseCommand", "parse_overrides", "route_overrides")

_ConfigT = TypeVar("_ConfigT", bound=NamedTuple)


def parse_overrides(tokens: list[str]) -> dict[str, str]:
    """
    Parses the flat "--key value" and "--key=value" overrides left over by the argument parser.

    :param tokens: Remaining command line tokens.
    :return: Key to raw value mapping, dashes in keys become underscores.
    :raises InputError: if a token is not part of a key/value pair.
    """
    overrides: dict[str, str] = {}
    i: int = 0
    while i < len(tokens):
        token: str = tokens[i]
        if not token.startswith("--") or len(token) == 2:
            raise InputError(f"Unexpected argument '{token}', overrides are written as --key value")
        key, sep, value = token[2:].partition("=")
        if not sep:
            if i + 1 >= len(tokens):
                raise InputError(f"Override '{token}' has no value")
            value = tokens[i + 1]
            i += 1
        overrides[key.replace("-", "_")] = value
        i += 1
    return overrides


def route_overrides(overrides: dict[str, str], records: dict[str, type[NamedTuple]]) -> dict[str, dict[str, str]]:
    """
    Assigns every override to the config records that have the field.

    A key may be qualified with the record name ("capture.seed"); a bare key goes to every
    record with that field.

    :param overrides: Key to raw value mapping.
    :param records: Record name to record class mapping.
    :return: Record name to overrides mapping.
    :raises InputError: if a key matches no record.
    """
    routed: dict[str, dict[str, str]] = {name: {} for name in records}
    for key, value in overrides.items():
        prefix, dot, field = key.rpartition(".")
        targets: list[str] = (
            [prefix] if dot and prefix in records else [name for name, cls in records.items() if key in cls._fields]
        )
        field = field if dot else key
        if not targets or any(field not in records[name]._fields for name in targets):
            raise InputError(f"Unknown setting '--{key}' for this command")
        for name in targets:
            routed[name][field] = value
    return routed


class BaseCommand:
    """
    Base class of the subcommands.

    :cvar name: Subcommand name.
    :cvar summary: One line help text.
    """

    name: str = ""
    summary: str = ""

    def __init__(self, config: Config, tmpl: TmplRender) -> None:
        """
        Initialize shared dependencies of the commands.

        :param config: Config object with the ambient settings.
        :param tmpl: TmplRender object for the text reports.
        """
        self._config: Config = config
        self._tmpl: TmplRender = tmpl
        self._timer: PhaseTimer = PhaseTimer()

    # region Public methods
    def configure(self, parser: ArgumentParser) -> None:
        """
        Adds the command arguments.

        :param parser: Subcommand parser.
        """

    def run(self, args: Namespace) -> int:
        """
        Runs the command.

        :param args: Parsed arguments, with the flat overrides in args.overrides.
        :return: Exit code.
        """
        raise NotImplementedError

    # endregion

    # region Private methods
    def _threads(self, args: Namespace) -> int:
        threads: int | None = getattr(args, "threads", None)
        if threads is not None and threads < 1:
            raise InputError(f"--threads must be positive, got {threads}")
        return threads or self._config.threads

    def _load_configs(self, args: Namespace, files: dict[str, tuple[type[Any], Path | None]]) -> dict[str, Any]:
        """
        Loads every config record of the command and applies the overrides routed to it.

        :param args: Parsed arguments.
        :param files: Record name to (record class, JSON file or None) mapping.
        :return: Record name to config record mapping.
        """
        routed: dict[str, dict[str, str]] = route_overrides(
            overrides=getattr(args, "overrides", {}) or {}, records={name: cls for name, (cls, _) in files.items()}
        )
        return {
            name: load_json_config(cls=cls, path=path, overrides=routed[name]) for name, (cls, path) in files.items()
        }

    def _report(self, tmpl: str, data: dict[str, Any], path: Path | None = None) -> str:
        """
        Renders a text report, logs it and writes it next to the machine-readable output.

        :param tmpl: Template name.
        :param data: Template data.
        :param path: Output file, nothing is written when None.
        :return: Rendered text.
        :raises StorageError: if the file cannot be written.
        """
        text: str = self._tmpl.render(tmpl=tmpl, data=data)
        for line in text.rstrip().splitlines():
            logger.info(line)
        if path is not None:
            try:
                Path(path).parent.mkdir(parents=True, exist_ok=True)
                Path(path).write_text(text, encoding="utf-8")
            except OSError as exc:
                raise StorageError(f"Cannot write report {path}: {exc}") from exc
        return text

    def _finish(self, path: Path, seed: int, configs: dict[str, Any], artifacts: dict[str, Any]) -> None:
        """
        Writes the run manifest.

        :param path: Manifest file.
        :param seed: Seed of the run.
        :param configs: Config records used.
        :param artifacts: Artifact paths and recorded values.
        """
        write_manifest(
            path=path,
            manifest=build_manifest(
                command=self.name, seed=seed, configs=configs, artifacts=artifacts, timer=self._timer
            ),
        )

    # endregion
