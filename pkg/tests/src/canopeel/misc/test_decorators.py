"""Unit tests for src/canopeel/misc/decorators.py"""

# pylint: disable=redefined-outer-name

from unittest.mock import MagicMock

import pytest
from environs import EnvError
from pytest_mock import MockerFixture

from canopeel.misc.decorators import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, handle_cmd_exc
from canopeel.misc.exceptions import InputError, NumericalError, StorageError

__all__: tuple = ()


@pytest.fixture
def mock_logger(mocker: MockerFixture) -> MagicMock:
    """
    Fixture to replace the logger of the decorators module.

    :param mocker: Pytest-mock fixture.
    :return: Mocked logger.
    """
    return mocker.patch(target="canopeel.misc.decorators.logger")


def test_exit_code_constants() -> None:
    """
    Test the exit code values.

    :return: None
    """
    assert (EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERICAL) == (0, 1, 2, 3)


def test_handle_cmd_exc_returns_result(mock_logger: MagicMock) -> None:
    """
    Test that a command returning None exits with 0 and a returned code passes through.

    :param mock_logger: Mocked logger.
    :return: None
    """

    @handle_cmd_exc
    def quiet() -> None:
        """Command without a result."""

    @handle_cmd_exc
    def explicit() -> int:
        """Command returning a code."""
        return 5

    assert quiet() == EXIT_OK
    assert explicit() == 5
    assert quiet.__name__ == "quiet"
    mock_logger.error.assert_not_called()


@pytest.mark.parametrize(
    "exc, code",
    [
        (InputError("bad flag"), EXIT_USAGE),
        (StorageError("missing file"), EXIT_IO),
        (NumericalError("nan loss"), EXIT_NUMERICAL),
        (EnvError("bad env"), EXIT_USAGE),
        (FileNotFoundError("gone"), EXIT_IO),
        (ZeroDivisionError("division"), EXIT_NUMERICAL),
        (FloatingPointError("overflow"), EXIT_NUMERICAL),
    ],
)
def test_handle_cmd_exc_maps_errors(mock_logger: MagicMock, exc: Exception, code: int) -> None:
    """
    Test that every error kind exits with its code and is logged once.

    :param mock_logger: Mocked logger.
    :param exc: Raised exception.
    :param code: Expected exit code.
    :return: None
    """

    @handle_cmd_exc
    def failing() -> None:
        """Command raising the exception."""
        raise exc

    assert failing() == code
    mock_logger.error.assert_called_once()


def test_handle_cmd_exc_unexpected(mock_logger: MagicMock) -> None:
    """
    Test that an unexpected exception exits with 1 and is logged as critical.

    :param mock_logger: Mocked logger.
    :return: None
    """

    @handle_cmd_exc
    def broken(value: int) -> int:
        """Command with a bug."""
        raise RuntimeError(f"broken {value}")

    assert broken(value=3) == EXIT_USAGE
    mock_logger.critical.assert_called_once()
    assert "broken" in mock_logger.critical.call_args.args[0]
