"""Unit tests for src/canopeel/services/analysis/pointcloud.py"""

from pathlib import Path

import numpy as np
import pytest

from canopeel.misc.exceptions import InputError
from canopeel.services.analysis.pointcloud import PointCloud

__all__: tuple = ()


def test_empty_cloud() -> None:
    """
    The default cloud has no points and (0, 3) arrays.

    :return: None
    """
    cloud: PointCloud = PointCloud()

    assert len(cloud) == 0
    assert cloud.positions.shape == (0, 3)
    assert cloud.colors.shape == (0, 3)


def test_select_keeps_order() -> None:
    """
    Test that selection keeps the original order.

    :return: None
    """
    cloud: PointCloud = PointCloud(positions=np.arange(12.0).reshape(4, 3), colors=np.full((4, 3), 0.5))
    subset: PointCloud = cloud.select(np.array([True, False, True, True]))

    np.testing.assert_array_equal(subset.positions[:, 0], [0.0, 6.0, 9.0])


def test_mismatched_lengths_raise() -> None:
    """
    Test that positions and colors must match in length and positions must be finite.

    :return: None
    """
    with pytest.raises(InputError):
        PointCloud(positions=np.zeros((3, 3)), colors=np.zeros((2, 3)))
    with pytest.raises(InputError):
        PointCloud(positions=np.array([[0.0, np.nan, 0.0]]), colors=np.zeros((1, 3)))


def test_save_and_load(tmp_path: Path) -> None:
    """
    Positions survive to 6 decimals, colors to 8-bit sRGB precision.

    :param tmp_path: Temporary directory.
    :return: None
    """
    cloud: PointCloud = PointCloud(
        positions=np.array([[1.25, -3.5, 10.125], [0.0, 0.0, 0.0]]),
        colors=np.array([[0.2, 0.5, 0.8], [0.0, 1.0, 0.0]]),
    )
    path: Path = tmp_path / "cloud.ply"
    cloud.save(path=path)
    loaded: PointCloud = PointCloud.load(path=path)

    assert len(loaded) == 2
    np.testing.assert_allclose(loaded.positions, cloud.positions, atol=1e-6)
    np.testing.assert_allclose(loaded.colors, cloud.colors, atol=0.01)
