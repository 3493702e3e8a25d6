"""The module implements the decorators used by the command handlers."""

import sys
from functools import wraps
from traceback import format_exc
from typing import Any, Callable

from environs import EnvError

from canopeel.config import logger
from canopeel.misc.exceptions import CanopeelError, InputError, NumericalError, StorageError

__all__: tuple[str, ...] = ("EXIT_IO", "EXIT_NUMERICAL", "EXIT_OK", "EXIT_USAGE", "handle_cmd_exc")

EXIT_OK: int = 0
EXIT_USAGE: int = InputError.exit_code
EXIT_IO: int = StorageError.exit_code
EXIT_NUMERICAL: int = NumericalError.exit_code


def handle_cmd_exc(func: Callable[..., int | None]) -> Callable[..., int]:
    """
    A decorator that turns the exceptions of a command into its exit code.

    Library errors carry their own code, other I/O errors exit with 2, arithmetic errors with 3
    and anything else with 1.

    :param func: Command function returning None or an exit code.
    :return: The decorated function, always returning an exit code.
    """

    @wraps(wrapped=func)
    def wrapper(*args: Any, **kwargs: Any) -> int:
        """
        Runs the command and logs the error that stopped it.

        :param args: Positional arguments passed to the command.
        :param kwargs: Keyword arguments passed to the command.
        :return: Exit code.
        """
        try:
            result: int | None = func(*args, **kwargs)
            return EXIT_OK if result is None else result
        except CanopeelError as exc:
            logger.error(f"{type(exc).__name__}: {exc}")
            return exc.exit_code
        except EnvError as exc:
            logger.error(f"Invalid environment: {exc}")
            return EXIT_USAGE
        except OSError as exc:
            logger.error(f"I/O error: {exc}")
            return EXIT_IO
        except ArithmeticError as exc:
            logger.error(f"Numerical failure: {exc}")
            return EXIT_NUMERICAL
        except Exception as exc:  # pylint: disable=broad-exception-caught
            tb: str = f"\n{format_exc()}" if not hasattr(sys, "tracebacklimit") else ""
            logger.critical(f"Command '{func.__name__}' caused an unexpected exception: {exc!r}{tb}")
            return EXIT_USAGE

    return wrapper
