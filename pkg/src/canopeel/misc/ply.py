"""ASCII PLY reading and writing for colored point clouds."""

from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from canopeel.misc.exceptions import StorageError
from canopeel.misc.imaging import linear_to_srgb, srgb_to_linear

__all__: tuple[str, ...] = ("read_ply", "write_ply")

_PLY_HEADER: str = """ply
format ascii 1.0
element vertex {vertex_count}
property float x
property float y
property float z
property uchar red
property uchar green
property uchar blue
end_header
"""


def write_ply(path: Path, positions: NDArray[np.float64], colors: NDArray[np.float64]) -> None:
    """
    Writes points with linear RGB colors, colors are stored as 8-bit sRGB.

    :param path: Output file.
    :param positions: Positions of shape (N, 3).
    :param colors: Linear colors of shape (N, 3).
    :raises StorageError: if the file cannot be written.
    """
    xyz: NDArray[np.float64] = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    rgb: NDArray[np.int64] = np.round(linear_to_srgb(np.asarray(colors).reshape(-1, 3)) * 255.0).astype(np.int64)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with Path(path).open(mode="w", encoding="ascii", newline="\n") as file:
            file.write(_PLY_HEADER.format(vertex_count=len(xyz)))
            for (x, y, z), (r, g, b) in zip(xyz, rgb):
                file.write(f"{x:.6f} {y:.6f} {z:.6f} {r:d} {g:d} {b:d}\n")
    except OSError as exc:
        raise StorageError(f"Cannot write point cloud {path}: {exc}") from exc


def read_ply(path: Path) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Reads an ASCII PLY file written by write_ply.

    :param path: Input file.
    :return: Positions (N, 3) and linear colors (N, 3).
    :raises StorageError: if the file cannot be read or is not an ASCII PLY point cloud.
    """
    try:
        lines: list[str] = Path(path).read_text(encoding="ascii").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise StorageError(f"Cannot read point cloud {path}: {exc}") from exc
    if not lines or lines[0].strip() != "ply" or "end_header" not in lines:
        raise StorageError(f"{path} is not a PLY file")
    header_end: int = lines.index("end_header")
    count: int = 0
    for line in lines[:header_end]:
        parts: list[str] = line.split()
        if parts[:2] == ["element", "vertex"]:
            count = int(parts[2])
        if parts[:2] == ["format", "binary_little_endian"] or parts[:2] == ["format", "binary_big_endian"]:
            raise StorageError(f"{path}: only ASCII PLY files are supported")
    body: list[str] = lines[header_end + 1 : header_end + 1 + count]
    if len(body) != count:
        raise StorageError(f"{path}: expected {count} vertices, found {len(body)}")
    if count == 0:
        return np.zeros((0, 3)), np.zeros((0, 3))
    values: NDArray[np.float64] = np.array([row.split()[:6] for row in body], dtype=np.float64)
    return values[:, :3], srgb_to_linear(values[:, 3:6] / 255.0)
