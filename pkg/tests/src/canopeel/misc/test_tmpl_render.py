"""Unit tests for src/canopeel/misc/tmpl_render.py"""

# pylint: disable=protected-access
# pylint: disable=redefined-outer-name

from pathlib import Path

import pytest
from jinja2 import UndefinedError

import canopeel
from canopeel.misc import tmpl_render
from canopeel.misc.dataclasses import Paths
from canopeel.misc.tmpl_render import TmplRender

__all__: tuple = ()


@pytest.fixture
def mock_paths(tmp_path: Path) -> Paths:
    """
    Fixture to create a Paths object with an empty template folder.

    :param tmp_path: Temporary directory provided by pytest.
    :return: Paths object with mock directories.
    """
    tmpl_path: Path = Path(tmp_path, "templates")
    tmpl_path.mkdir(parents=True, exist_ok=True)
    return Paths(logs=Path(tmp_path, "logs"), tmpl=tmpl_path)


@pytest.fixture
def tmpl(mock_paths: Paths) -> TmplRender:
    """
    Fixture to create a TmplRender instance with mock paths.

    :param mock_paths: Fixture providing a Paths object with mock directories.
    :return: TmplRender instance.
    """
    return TmplRender(paths=mock_paths)


def test_template_renderer_init(mock_paths: Paths, tmpl: TmplRender) -> None:
    """
    Test that TmplRender initializes the environment with the template folder and the fmt filter.

    :param mock_paths: Fixture providing a Paths object with mock directories.
    :param tmpl: Fixture providing a TmplRender instance.
    :return: None
    """
    assert tmpl._env.trim_blocks is True
    assert tmpl._env.lstrip_blocks is True
    assert "fmt" in tmpl._env.filters
    # noinspection PyUnresolvedReferences
    assert tmpl._env.loader.searchpath == [str(mock_paths.tmpl)]  # type: ignore


@pytest.mark.parametrize(
    "value, digits, expected",
    [(0.5, 4, "0.5000"), (2, 1, "2.0"), (float("inf"), 4, "inf"), (float("-inf"), 4, "-inf"), (float("nan"), 4, "nan")],
)
def test_fmt(value: float, digits: int, expected: str) -> None:
    """
    Test the number formatting filter.

    :param value: Number.
    :param digits: Digits after the decimal point.
    :param expected: Expected text.
    :return: None
    """
    assert tmpl_render._fmt(value, digits) == expected


def test_render_with_data(mock_paths: Paths, tmpl: TmplRender) -> None:
    """
    Test render with data and with the filter.

    :param mock_paths: Fixture providing a Paths object with mock directories.
    :param tmpl: Fixture providing a TmplRender instance.
    :return: None
    """
    Path(mock_paths.tmpl, "test.jinja2").write_text(data="PSNR {{ value | fmt(2) }} dB\n", encoding="utf-8")

    assert tmpl.render(tmpl="test.jinja2", data={"value": 31.456}) == "PSNR 31.46 dB\n"
    assert tmpl.templates() == ["test.jinja2"]


def test_render_error(mock_paths: Paths, tmpl: TmplRender) -> None:
    """
    Test that missing templates and missing variables raise.

    :param mock_paths: Fixture providing a Paths object with mock directories.
    :param tmpl: Fixture providing a TmplRender instance.
    :return: None
    """
    Path(mock_paths.tmpl, "test.jinja2").write_text(data="{{ missing }}", encoding="utf-8")

    with pytest.raises(expected_exception=Exception):
        tmpl.render(tmpl="non_existent.jinja2")
    with pytest.raises(expected_exception=UndefinedError):
        tmpl.render(tmpl="test.jinja2")


def test_bundled_templates(tmp_path: Path) -> None:
    """
    Test that the bundled report templates are found and the sweep report renders its rows.

    :param tmp_path: Temporary directory provided by pytest.
    :return: None
    """
    renderer: TmplRender = TmplRender(paths=Paths(logs=tmp_path, tmpl=Path(canopeel.__file__).parent / "templates"))

    report: str = renderer.render(
        tmpl="sweep_report.jinja2", data={"rows": [{"views": 9, "msssim": 0.5, "msssim_std": float("nan")}]}
    )

    assert "sweep_report.jinja2" in renderer.templates()
    assert "eval_report.jinja2" in renderer.templates()
    assert "0.5000" in report
    assert "nan" in report
    assert report.splitlines()[1].split()[0] == "9"
