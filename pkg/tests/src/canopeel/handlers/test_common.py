"""Unit tests for src/canopeel/handlers/common.py"""

# pylint: disable=protected-access
# pylint: disable=redefined-outer-name

import json
from argparse import Namespace
from pathlib import Path
from unittest.mock import MagicMock

import pytest

from canopeel.handlers.common import BaseCommand, parse_overrides, route_overrides
from canopeel.misc.dataclasses import CaptureConfig, ForestParams, Paths, TrainConfig
from canopeel.misc.exceptions import InputError
from canopeel.misc.tmpl_render import TmplRender

__all__: tuple = ()


# region Fixtures
@pytest.fixture
def command(tmp_path: Path) -> BaseCommand:
    """
    Fixture with a base command over a template folder holding one report template.

    :param tmp_path: Temporary directory provided by pytest.
    :return: BaseCommand.
    """
    tmpl_dir: Path = Path(tmp_path, "templates")
    tmpl_dir.mkdir()
    Path(tmpl_dir, "report.jinja2").write_text("count: {{ count }}\nmode: {{ mode }}\n", encoding="utf-8")
    config: MagicMock = MagicMock()
    config.threads = 4
    cmd: BaseCommand = BaseCommand(config=config, tmpl=TmplRender(paths=Paths(logs=tmp_path, tmpl=tmpl_dir)))
    cmd.name = "dummy"
    return cmd


# endregion


# region Overrides
def test_parse_overrides_forms() -> None:
    """
    Test the "--key value" and "--key=value" forms and the dash to underscore conversion.

    :return: None
    """
    tokens: list[str] = ["--step-count", "20", "--loss_kind=raw", "--bounds", "[0, 0, 0, 1, 1, 1]", "--x=a=b"]

    assert parse_overrides(tokens) == {
        "step_count": "20",
        "loss_kind": "raw",
        "bounds": "[0, 0, 0, 1, 1, 1]",
        "x": "a=b",
    }
    assert not parse_overrides([])


@pytest.mark.parametrize("tokens", [["value"], ["--"], ["--step_count"], ["--a", "1", "stray"]])
def test_parse_overrides_rejects(tokens: list[str]) -> None:
    """
    Test that tokens outside key/value pairs are rejected.

    :param tokens: Remaining command line tokens.
    :return: None
    """
    with pytest.raises(InputError):
        parse_overrides(tokens)


def test_route_overrides_bare_and_qualified() -> None:
    """
    Test that bare keys go to every record with the field and qualified keys to one record.

    :return: None
    """
    records: dict = {"forest": ForestParams, "capture": CaptureConfig}

    routed: dict[str, dict[str, str]] = route_overrides(
        overrides={"seed": "5", "extent": "12", "capture.seed": "9", "n_x": "3"}, records=records
    )

    assert routed == {"forest": {"seed": "5", "extent": "12"}, "capture": {"seed": "9", "n_x": "3"}}


@pytest.mark.parametrize("key", ["bogus", "capture.extent", "train.step_count"])
def test_route_overrides_rejects(key: str) -> None:
    """
    Test that keys matching no record field are rejected.

    :param key: Override key.
    :return: None
    """
    with pytest.raises(InputError, match="Unknown setting"):
        route_overrides(overrides={key: "1"}, records={"forest": ForestParams, "capture": CaptureConfig})


# endregion


# region BaseCommand
def test_base_command_run_is_abstract(command: BaseCommand) -> None:
    """
    Test that the base command cannot run.

    :param command: Base command.
    :return: None
    """
    with pytest.raises(NotImplementedError):
        command.run(Namespace())


@pytest.mark.parametrize("threads, expected", [(None, 4), (2, 2)])
def test_threads(command: BaseCommand, threads: int | None, expected: int) -> None:
    """
    Test that --threads wins over the configured worker count.

    :param command: Base command.
    :param threads: Command line value.
    :param expected: Worker count.
    :return: None
    """
    assert command._threads(Namespace(threads=threads)) == expected
    assert command._threads(Namespace()) == 4


def test_threads_rejects_zero(command: BaseCommand) -> None:
    """
    Test that a non-positive --threads is a usage error.

    :param command: Base command.
    :return: None
    """
    with pytest.raises(InputError):
        command._threads(Namespace(threads=0))


def test_load_configs(tmp_path: Path, command: BaseCommand) -> None:
    """
    Test that files and routed overrides combine per record.

    :param tmp_path: Temporary directory provided by pytest.
    :param command: Base command.
    :return: None
    """
    path: Path = Path(tmp_path, "train.json")
    path.write_text(json.dumps({"step_count": 50, "loss_kind": "raw"}), encoding="utf-8")
    args: Namespace = Namespace(overrides={"step_count": "7", "seed": "3"})

    configs: dict = command._load_configs(
        args=args, files={"train": (TrainConfig, path), "forest": (ForestParams, None)}
    )

    assert configs["train"].step_count == 7
    assert configs["train"].loss_kind == "raw"
    assert configs["forest"].seed == 3


def test_report_writes_text(tmp_path: Path, command: BaseCommand) -> None:
    """
    Test that reports are rendered and written when a path is given.

    :param tmp_path: Temporary directory provided by pytest.
    :param command: Base command.
    :return: None
    """
    path: Path = Path(tmp_path, "out", "report.txt")

    text: str = command._report(tmpl="report.jinja2", data={"count": 3, "mode": "crop"}, path=path)

    assert text == "count: 3\nmode: crop\n"
    assert path.read_text(encoding="utf-8") == text
    assert command._report(tmpl="report.jinja2", data={"count": 1, "mode": "full"}) == "count: 1\nmode: full\n"


def test_finish_writes_manifest(tmp_path: Path, command: BaseCommand) -> None:
    """
    Test that the manifest records the command, the configs and the timed phases.

    :param tmp_path: Temporary directory provided by pytest.
    :param command: Base command.
    :return: None
    """
    with command._timer.phase("work"):
        pass

    command._finish(
        path=Path(tmp_path, "manifest.json"),
        seed=11,
        configs={"train": TrainConfig()},
        artifacts={"out": Path(tmp_path, "x")},
    )

    data: dict = json.loads(Path(tmp_path, "manifest.json").read_text(encoding="utf-8"))
    assert data["command"] == "dummy"
    assert data["seed"] == 11
    assert data["config"]["train"]["loss_kind"] == "l1"
    assert data["artifacts"]["out"] == str(Path(tmp_path, "x"))
    assert "work" in data["phases"]


# endregion
