"""This module contains the command line parser and the registration of the commands."""

from argparse import ArgumentParser, Namespace
from typing import NoReturn

from canopeel import __version__
from canopeel.config import Config, logger
from canopeel.handlers.common import BaseCommand, parse_overrides
from canopeel.handlers.evaluate import EvalCommand
from canopeel.handlers.lighting import LightingCommand
from canopeel.handlers.render import RenderCommand
from canopeel.handlers.segment import SegmentCommand
from canopeel.handlers.stems import StemsCommand
from canopeel.handlers.sweep import SweepCommand
from canopeel.handlers.synth import SynthCommand
from canopeel.handlers.train import TrainCommand
from canopeel.misc.decorators import handle_cmd_exc
from canopeel.misc.exceptions import InputError
from canopeel.misc.tmpl_render import TmplRender

__all__: tuple[str, ...] = ("CliParser", "MainHandler")


class CliParser(ArgumentParser):
    """Argument parser that reports usage errors as InputError instead of exiting."""

    def error(self, message: str) -> NoReturn:
        """
        Raises the usage error.

        :param message: Parser message.
        :raises InputError: always.
        """
        raise InputError(f"{self.prog}: {message}")


class MainHandler:
    """Registers the subcommands and dispatches a command line to them."""

    def __init__(self, config: Config, tmpl: TmplRender) -> None:
        """
        Initialize necessary parameters and commands.

        :param config: Config object with the ambient settings.
        :param tmpl: TmplRender object for the text reports.
        """
        self._config: Config = config

        # region Initialize commands
        self._commands: dict[str, BaseCommand] = {
            command.name: command
            for command in (
                SynthCommand(config=config, tmpl=tmpl),
                TrainCommand(config=config, tmpl=tmpl),
                RenderCommand(config=config, tmpl=tmpl),
                EvalCommand(config=config, tmpl=tmpl),
                StemsCommand(config=config, tmpl=tmpl),
                LightingCommand(config=config, tmpl=tmpl),
                SegmentCommand(config=config, tmpl=tmpl),
                SweepCommand(config=config, tmpl=tmpl),
            )
        }
        # endregion

        self._parser: CliParser = self._build_parser()

    @property
    def commands(self) -> tuple[str, ...]:
        """
        Returns the registered subcommand names.

        :return: Names in registration order.
        """
        return tuple(self._commands)

    def _build_parser(self) -> CliParser:
        """
        Builds the parser with one subparser per command.

        :return: CliParser.
        """
        parser: CliParser = CliParser(
            prog="canopeel",
            allow_abbrev=False,
            description="Under-canopy radiance fields: synthesize, reconstruct, render ground-only views, count stems.",
            epilog="Settings of the JSON configs can be overridden with --key value after the command arguments.",
        )
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)
        for name, command in self._commands.items():
            child: ArgumentParser = sub.add_parser(
                name, help=command.summary, description=command.summary, allow_abbrev=False
            )
            child.add_argument("--seed", type=int, default=None, help="seed all randomness of the run flows from")
            child.add_argument("--threads", type=int, default=None, help="worker count, defaults to CANOPEEL_THREADS")
            command.configure(parser=child)
        return parser

    def parse(self, argv: list[str]) -> Namespace:
        """
        Parses a command line, unknown "--key value" pairs become config overrides.

        :param argv: Arguments without the program name.
        :return: Namespace with the command name and args.overrides.
        :raises InputError: on usage errors.
        """
        args, rest = self._parser.parse_known_args(argv)
        args.overrides = parse_overrides(rest)
        return args

    @handle_cmd_exc
    def dispatch(self, argv: list[str]) -> int:
        """
        Parses the command line and runs the command.

        :param argv: Arguments without the program name.
        :return: Exit code.
        """
        args: Namespace = self.parse(argv)
        logger.debug(f"Running '{args.command}' with overrides {args.overrides}")
        return self._commands[args.command].run(args)

    def usage(self) -> str:
        """
        Returns the usage text.

        :return: Usage.
        """
        return self._parser.format_help()
