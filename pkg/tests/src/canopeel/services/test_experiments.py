"""Unit tests for src/canopeel/services/experiments.py"""

# pylint: disable=redefined-outer-name, protected-access

import csv
from pathlib import Path

import numpy as np
import pytest

from canopeel.misc.dataclasses import CaptureConfig, FieldConfig, TrainConfig
from canopeel.misc.exceptions import InputError
from canopeel.services import experiments
from canopeel.services.experiments import SWEEP_HEADER, SweepRow, grid_for, sampling_sweep, write_sweep
from canopeel.services.geometry import Dtm
from canopeel.services.scene import AnalyticScene, CanopyBlob, GroundTexture

__all__: tuple = ()


# region Fixtures
@pytest.fixture
def veiled_scene() -> AnalyticScene:
    """
    Fixture with flat noisy ground over [-6, 6] x [-6, 6] under one thin canopy layer.

    :return: AnalyticScene.
    """
    return AnalyticScene(
        dtm=Dtm(origin=(-6.0, -6.0), cell_size=1.0, heights=np.zeros((13, 13))),
        texture=GroundTexture(
            origin=(-6.0, -6.0),
            cell=1.0,
            values=np.random.default_rng(2).random((14, 14)),
            color=(0.4, 0.3, 0.2),
        ),
        canopy=(CanopyBlob(center=(0.0, 0.0, 4.0), radii=(20.0, 20.0, 0.5), albedo=(0.1, 0.5, 0.1), opacity=0.3),),
    )


@pytest.fixture
def base_capture() -> CaptureConfig:
    """
    Fixture with a 2x2 base grid and two held-out views.

    :return: CaptureConfig.
    """
    return CaptureConfig(
        n_x=2, n_y=2, spacing=2.0, altitude=10.0, width=16, height=16, gsd_target=0.25, holdout_views=2
    )


# endregion


@pytest.mark.parametrize("views, grid", [(18, (6, 3)), (9, (3, 3)), (36, (6, 6)), (7, (7, 1)), (2, (2, 1))])
def test_grid_for(views: int, grid: tuple[int, int]) -> None:
    """
    Test that the grid is the most square factorization with n_x >= n_y.

    :param views: Camera count.
    :param grid: Expected (n_x, n_y).
    :return: None
    """
    assert grid_for(views) == grid


def test_grid_for_rejects_zero() -> None:
    """
    Test that at least one view is required.

    :return: None
    """
    with pytest.raises(InputError):
        grid_for(0)


def test_capture_for_keeps_the_covered_area(base_capture: CaptureConfig) -> None:
    """
    Test that denser grids span the same area and carry no held-out views.

    :param base_capture: Base capture.
    :return: None
    """
    dense: CaptureConfig = experiments._capture_for(base=base_capture._replace(n_x=4, n_y=4), views=9)
    single_row: CaptureConfig = experiments._capture_for(base=base_capture, views=3)

    assert (dense.n_x, dense.n_y) == (3, 3)
    assert dense.spacing == pytest.approx(3.0)
    assert dense.spacing_y == pytest.approx(3.0)
    assert dense.holdout_views == 0
    assert (single_row.n_x, single_row.n_y) == (3, 1)
    assert single_row.spacing == pytest.approx(1.0)
    assert single_row.spacing_y == pytest.approx(2.0)


@pytest.mark.parametrize("changes, counts", [({"holdout_views": 0}, (2,)), ({}, (1, 4))])
def test_sampling_sweep_rejects(
    veiled_scene: AnalyticScene, base_capture: CaptureConfig, changes: dict, counts: tuple[int, ...]
) -> None:
    """
    Test that the sweep needs held-out views and at least two training views per count.

    :param veiled_scene: Scene.
    :param base_capture: Base capture.
    :param changes: Replaced capture fields.
    :param counts: View counts.
    :return: None
    """
    with pytest.raises(InputError):
        sampling_sweep(
            scene=veiled_scene,
            capture=base_capture._replace(**changes),
            field_config=FieldConfig(resolution=(4, 4, 4)),
            train_config=TrainConfig(),
            view_counts=counts,
        )


def test_sampling_sweep_rows(veiled_scene: AnalyticScene, base_capture: CaptureConfig) -> None:
    """
    Test that a tiny sweep returns one finite row per count, in order.

    :param veiled_scene: Scene.
    :param base_capture: Base capture.
    :return: None
    """
    rows: list[SweepRow] = sampling_sweep(
        scene=veiled_scene,
        capture=base_capture,
        field_config=FieldConfig(resolution=(4, 4, 4), bounds=(-6.0, -6.0, -1.0, 6.0, 6.0, 6.0)),
        train_config=TrainConfig(n_samples=8, batch_size=32, step_count=2, checkpoint_every=0, log_every=1),
        view_counts=(4, 2),
    )

    assert [row.views for row in rows] == [4, 2]
    for row in rows:
        assert -1.0 <= row.msssim <= 1.0
        assert row.msssim_std >= 0.0


def test_write_sweep(tmp_path: Path) -> None:
    """
    Test the views,msssim CSV layout.

    :param tmp_path: Temporary directory.
    :return: None
    """
    path: Path = tmp_path / "out" / "sweep.csv"

    write_sweep(path=path, rows=[SweepRow(views=9, msssim=0.5, msssim_std=0.1), SweepRow(18, 0.75, 0.05)])

    with open(path, encoding="utf-8") as stream:
        table: list[list[str]] = list(csv.reader(stream))
    assert tuple(table[0]) == SWEEP_HEADER
    assert table[1:] == [["9", "0.5"], ["18", "0.75"]]
