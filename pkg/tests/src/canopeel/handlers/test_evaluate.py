"""Unit tests for src/canopeel/handlers/evaluate.py"""

# pylint: disable=redefined-outer-name

import csv
import json
from argparse import Namespace
from pathlib import Path
from unittest.mock import MagicMock

import numpy as np
import pytest

import canopeel
from canopeel.handlers.evaluate import EvalCommand, ViewScore, pair_views, score_views, summarize, write_metrics
from canopeel.misc.dataclasses import Paths
from canopeel.misc.exceptions import InputError
from canopeel.misc.imaging import write_png, write_png_linear
from canopeel.misc.tmpl_render import TmplRender

__all__: tuple = ()


# region Fixtures
@pytest.fixture
def image_dirs(tmp_path: Path) -> tuple[Path, Path]:
    """
    Fixture with two identical views rendered and referenced, and a target mask for the first.

    :param tmp_path: Temporary directory provided by pytest.
    :return: Rendered and reference directories.
    """
    rng: np.random.Generator = np.random.default_rng(5)
    rendered: Path = tmp_path / "rendered"
    oracle: Path = tmp_path / "ground"
    for name in ("view_000.png", "view_001.png"):
        image: np.ndarray = rng.uniform(0.05, 0.9, (16, 16, 3))
        write_png_linear(path=rendered / name, image=image)
        write_png_linear(path=oracle / name, image=image)
    mask: np.ndarray = np.zeros((16, 16))
    mask[4:8, 4:8] = 1.0
    write_png(path=tmp_path / "targets" / "view_000.png", image=mask)
    return rendered, oracle


# endregion


def test_pair_views(image_dirs: tuple[Path, Path]) -> None:
    """
    Test that the references define the compared names.

    :param image_dirs: Rendered and reference directories.
    :return: None
    """
    rendered, oracle = image_dirs
    write_png_linear(path=rendered / "extra.png", image=np.zeros((16, 16, 3)))

    assert pair_views(rendered_dir=rendered, oracle_dir=oracle) == ["view_000.png", "view_001.png"]


def test_pair_views_rejects(tmp_path: Path, image_dirs: tuple[Path, Path]) -> None:
    """
    Test the missing directory, empty reference and missing counterpart errors.

    :param tmp_path: Temporary directory provided by pytest.
    :param image_dirs: Rendered and reference directories.
    :return: None
    """
    rendered, oracle = image_dirs
    empty: Path = tmp_path / "empty"
    empty.mkdir()

    with pytest.raises(InputError, match="not a directory"):
        pair_views(rendered_dir=tmp_path / "absent", oracle_dir=oracle)
    with pytest.raises(InputError, match="No reference images"):
        pair_views(rendered_dir=rendered, oracle_dir=empty)
    (rendered / "view_001.png").unlink()
    with pytest.raises(InputError, match="view_001.png"):
        pair_views(rendered_dir=rendered, oracle_dir=oracle)


def test_score_identical_views(image_dirs: tuple[Path, Path]) -> None:
    """
    Test that identical views score perfectly and only masked views get a target error.

    :param image_dirs: Rendered and reference directories.
    :return: None
    """
    rendered, oracle = image_dirs

    scores: list[ViewScore] = score_views(rendered_dir=rendered, oracle_dir=oracle)

    assert [s.name for s in scores] == ["view_000.png", "view_001.png"]
    for score in scores:
        assert score.msssim == pytest.approx(1.0, abs=1e-9)
        assert score.psnr == float("inf")
    assert scores[0].target_error == pytest.approx(0.0)
    assert np.isnan(scores[1].target_error)


def test_summarize() -> None:
    """
    Test the mean and std rows, the infinite PSNR row and the dropped metric without values.

    :return: None
    """
    scores: list[ViewScore] = [
        ViewScore(name="a.png", msssim=0.5, psnr=float("inf"), target_error=float("nan")),
        ViewScore(name="b.png", msssim=0.7, psnr=float("inf"), target_error=float("nan")),
    ]

    summary: dict[str, float] = summarize(scores)

    assert set(summary) == {"msssim_mean", "msssim_std", "psnr_mean", "psnr_std"}
    assert summary["msssim_mean"] == pytest.approx(0.6)
    assert summary["msssim_std"] == pytest.approx(0.1)
    assert summary["psnr_mean"] == float("inf")
    assert summary["psnr_std"] == 0.0


def test_write_metrics(tmp_path: Path) -> None:
    """
    Test the name,value layout: per-view rows first, then the summary rows.

    :param tmp_path: Temporary directory provided by pytest.
    :return: None
    """
    scores: list[ViewScore] = [
        ViewScore(name="view_000.png", msssim=0.8, psnr=20.0, target_error=0.05),
        ViewScore(name="view_001.png", msssim=0.6, psnr=30.0, target_error=float("nan")),
    ]

    summary: dict[str, float] = write_metrics(path=tmp_path / "out" / "metrics.csv", scores=scores)

    with open(tmp_path / "out" / "metrics.csv", encoding="utf-8") as stream:
        rows: list[list[str]] = list(csv.reader(stream))
    assert rows[0] == ["name", "value"]
    assert [row[0] for row in rows[1:6]] == [
        "view_000.msssim",
        "view_000.psnr",
        "view_000.target_error",
        "view_001.msssim",
        "view_001.psnr",
    ]
    assert float(rows[2][1]) == pytest.approx(20.0)
    assert {name: float(value) for name, value in rows[6:]} == pytest.approx(summary)
    assert summary["psnr_mean"] == pytest.approx(25.0)
    assert summary["target_error_std"] == pytest.approx(0.0)


def test_eval_command_run(tmp_path: Path, image_dirs: tuple[Path, Path]) -> None:
    """
    Test that the command writes the CSV, the text report and the manifest.

    :param tmp_path: Temporary directory provided by pytest.
    :param image_dirs: Rendered and reference directories.
    :return: None
    """
    rendered, oracle = image_dirs
    paths: Paths = Paths(logs=tmp_path, tmpl=Path(canopeel.__file__).parent / "templates")
    command: EvalCommand = EvalCommand(config=MagicMock(), tmpl=TmplRender(paths=paths))
    out: Path = tmp_path / "metrics" / "crop.csv"

    code: int = command.run(Namespace(rendered=rendered, oracle=oracle, out=out, seed=None, overrides={}))

    assert code == 0
    assert out.is_file()
    report: str = (tmp_path / "metrics" / "crop.txt").read_text(encoding="utf-8")
    assert "view_001.png" in report
    assert "psnr_mean: inf" in report
    manifest: dict = json.loads((tmp_path / "metrics" / "crop.manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "eval"
    assert manifest["artifacts"]["metrics"] == str(out)
