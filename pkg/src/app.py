"""Main program module."""

import sys

from canopeel.config import Config, Logging, logger
from canopeel.handlers.main import MainHandler
from canopeel.misc.decorators import EXIT_USAGE
from canopeel.misc.tmpl_render import TmplRender

__all__: tuple = ()


class CanopeelApp:
    """The main class that executes the application logic."""

    def __init__(self, config: Config | None = None) -> None:
        """
        Initialization necessary parameters.

        :param config: Config object, read from the environment when None.
        """
        self._config: Config = config or Config()
        Logging(debug=self._config.debug, log_dir=self._config.paths.logs)
        self._tmpl: TmplRender = TmplRender(paths=self._config.paths)
        self._handler: MainHandler = MainHandler(config=self._config, tmpl=self._tmpl)

    def run(self, argv: list[str]) -> int:
        """
        Runs one command.

        :param argv: Arguments without the program name.
        :return: Exit code.
        """
        if not argv:
            logger.error("No command given")
            sys.stderr.write(self._handler.usage())
            return EXIT_USAGE
        return self._handler.dispatch(argv)


def main(argv: list[str] | None = None) -> int:
    """
    Main function

    :param argv: Arguments without the program name, sys.argv is used when None.
    :return: Exit code.
    """
    try:
        return CanopeelApp().run(sys.argv[1:] if argv is None else argv)
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return EXIT_USAGE
    except Exception as exc:  # pylint: disable=broad-exception-caught
        logger.critical(f"Unhandled error: {repr(exc)}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
