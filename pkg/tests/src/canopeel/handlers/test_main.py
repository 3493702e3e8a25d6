"""Unit tests for src/canopeel/handlers/main.py"""

# pylint: disable=redefined-outer-name

from argparse import Namespace
from pathlib import Path
from unittest.mock import MagicMock

import pytest
from pytest_mock import MockerFixture

import canopeel
from canopeel.handlers.main import CliParser, MainHandler
from canopeel.misc.dataclasses import Paths
from canopeel.misc.exceptions import InputError
from canopeel.misc.tmpl_render import TmplRender

__all__: tuple = ()


@pytest.fixture
def handler(tmp_path: Path) -> MainHandler:
    """
    Fixture with the main handler over the bundled templates.

    :param tmp_path: Temporary directory provided by pytest.
    :return: MainHandler.
    """
    config: MagicMock = MagicMock()
    config.threads = 1
    paths: Paths = Paths(logs=tmp_path, tmpl=Path(canopeel.__file__).parent / "templates")
    return MainHandler(config=config, tmpl=TmplRender(paths=paths))


def test_commands_registered_in_order(handler: MainHandler) -> None:
    """
    Test the registered subcommands.

    :param handler: Main handler.
    :return: None
    """
    assert handler.commands == (
        "synth",
        "train",
        "render",
        "eval",
        "stems",
        "inspect-lighting",
        "segment",
        "sweep",
    )


def test_usage_lists_commands(handler: MainHandler) -> None:
    """
    Test that the usage text names every command.

    :param handler: Main handler.
    :return: None
    """
    usage: str = handler.usage()

    for name in handler.commands:
        assert name in usage


def test_parse_collects_overrides(handler: MainHandler) -> None:
    """
    Test that unknown "--key value" pairs become overrides next to the parsed arguments.

    :param handler: Main handler.
    :return: None
    """
    args: Namespace = handler.parse(
        ["train", "--data", "d", "--out", "o", "--seed", "3", "--step_count", "20", "--learning-rate=0.1"]
    )

    assert args.command == "train"
    assert args.data == Path("d")
    assert args.seed == 3
    assert args.threads is None
    assert args.overrides == {"step_count": "20", "learning_rate": "0.1"}


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["unknown"],
        ["train", "--data", "d"],
        ["render", "--checkpoint", "c", "--cameras", "k", "--out", "o", "--samples", "many"],
        ["segment", "--data", "d", "--pick", "0", "1", "2", "--color", "0.1", "0.2", "0.3"],
        ["eval", "--rendered", "r", "--oracle", "o", "--out", "m.csv", "stray"],
    ],
)
def test_parse_usage_errors(handler: MainHandler, argv: list[str]) -> None:
    """
    Test that usage errors raise InputError instead of exiting.

    :param handler: Main handler.
    :param argv: Command line.
    :return: None
    """
    with pytest.raises(InputError):
        handler.parse(argv)


def test_cli_parser_error() -> None:
    """
    Test that the parser reports errors as exceptions.

    :return: None
    """
    with pytest.raises(InputError, match="prog: broken"):
        CliParser(prog="prog").error("broken")


def test_dispatch_usage_error_exits_with_1(handler: MainHandler) -> None:
    """
    Test that a usage error becomes exit code 1.

    :param handler: Main handler.
    :return: None
    """
    assert handler.dispatch(["train", "--data", "d"]) == 1
    assert handler.dispatch(["synth", "--out", "o", "--bogus", "1"]) == 1


def test_dispatch_runs_command(handler: MainHandler, mocker: MockerFixture) -> None:
    """
    Test that dispatch hands the parsed arguments to the selected command.

    :param handler: Main handler.
    :param mocker: Pytest-mock fixture.
    :return: None
    """
    run: MagicMock = mocker.patch(target="canopeel.handlers.evaluate.EvalCommand.run", return_value=0)

    code: int = handler.dispatch(["eval", "--rendered", "r", "--oracle", "o", "--out", "m.csv"])

    assert code == 0
    run.assert_called_once()
    assert run.call_args.args[0].oracle == Path("o")


def test_dispatch_maps_storage_errors(handler: MainHandler, tmp_path: Path) -> None:
    """
    Test that a missing dataset exits with the storage error code.

    :param handler: Main handler.
    :param tmp_path: Temporary directory provided by pytest.
    :return: None
    """
    assert handler.dispatch(["train", "--data", str(tmp_path / "absent"), "--out", str(tmp_path / "run")]) == 2
