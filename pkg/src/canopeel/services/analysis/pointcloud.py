"""Colored point clouds exported from the density field."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from canopeel.misc.exceptions import InputError
from canopeel.misc.ply import read_ply, write_ply

__all__: tuple[str, ...] = ("PointCloud",)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """
    Points with linear RGB colors.

    :param positions: Positions of shape (N, 3) in meters.
    :param colors: Linear colors of shape (N, 3).
    """

    positions: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, 3)))
    colors: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self) -> None:
        positions: NDArray[np.float64] = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        colors: NDArray[np.float64] = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if len(positions) != len(colors):
            raise InputError(f"{len(positions)} positions but {len(colors)} colors")
        if not np.all(np.isfinite(positions)):
            raise InputError("Point coordinates must be finite")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "colors", colors)

    def __len__(self) -> int:
        return int(self.positions.shape[0])

    def select(self, mask: NDArray[np.bool_]) -> "PointCloud":
        """
        Returns the points where mask is set, in their original order.

        :param mask: Boolean mask of length N.
        :return: PointCloud.
        """
        return PointCloud(positions=self.positions[mask], colors=self.colors[mask])

    def save(self, path: Path) -> None:
        """
        Writes the cloud as an ASCII PLY file.

        :param path: Output file.
        """
        write_ply(path=path, positions=self.positions, colors=self.colors)

    @classmethod
    def load(cls, path: Path) -> "PointCloud":
        """
        Reads an ASCII PLY file.

        :param path: Input file.
        :return: PointCloud.
        """
        positions, colors = read_ply(path=path)
        return cls(positions=positions, colors=colors)
