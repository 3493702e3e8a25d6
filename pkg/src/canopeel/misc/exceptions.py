"""Exceptions raised by the library, each kind maps to a command line exit code."""

__all__: tuple[str, ...] = ("CanopeelError", "InputError", "NumericalError", "StorageError")


class CanopeelError(Exception):
    """
    Base class for all library errors.

    :cvar exit_code: Process exit code used by the command line interface.
    """

    exit_code: int = 1


class InputError(CanopeelError, ValueError):
    """Invalid argument or violated precondition."""

    exit_code: int = 1


class StorageError(CanopeelError, OSError):
    """A file cannot be read or written, or has a malformed layout."""

    exit_code: int = 2


class NumericalError(CanopeelError, ArithmeticError):
    """A computation produced a non-finite value."""

    exit_code: int = 3
