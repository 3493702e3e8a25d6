"""
Dense voxel radiance field.

Every voxel stores five raw parameters (sigma, r, g, b, v). Queries interpolate the raw
values trilinearly between voxel centers and then apply softplus to sigma and sigmoid to
color and visibility, so any raw value gives a valid sample.
"""

import struct
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray
from scipy.special import expit

from canopeel.misc.dataclasses import FieldConfig
from canopeel.misc.exceptions import InputError, StorageError
from canopeel.services.analysis.pointcloud import PointCloud
from canopeel.services.geometry import Dtm

__all__: tuple[str, ...] = (
    "CHANNELS",
    "FieldSample",
    "ParamGrad",
    "PointQuery",
    "VoxelField",
    "export_points",
    "field_bounds",
    "field_from_config",
    "field_new",
    "field_param_grad",
    "field_sample",
    "inverse_sigmoid",
    "inverse_softplus",
    "load_checkpoint",
    "query_points",
    "save_checkpoint",
    "sigmoid",
    "softplus",
)

CHANNELS: int = 5

_MAGIC: bytes = b"CNPL"
_VERSION: int = 1
_HEADER: struct.Struct = struct.Struct("<4sI6d3I")

# Empty space outside the bounds
_OUTSIDE_COLOR: float = 0.5


# region Activations
def softplus(x: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Returns log(1 + exp(x)) without overflow.

    :param x: Raw values.
    :return: Non-negative values.
    """
    return np.logaddexp(0.0, x)


def sigmoid(x: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Returns 1 / (1 + exp(-x)) without overflow.

    :param x: Raw values.
    :return: Values in [0, 1].
    """
    return expit(x)


def inverse_softplus(y: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Returns the raw value whose softplus is y.

    :param y: Positive values.
    :return: Raw values.
    """
    y = np.maximum(np.asarray(y, dtype=np.float64), 1e-12)
    return y + np.log(-np.expm1(-y))


def inverse_sigmoid(y: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Returns the raw value whose sigmoid is y, y is clipped away from 0 and 1.

    :param y: Values in [0, 1].
    :return: Raw values.
    """
    y = np.clip(np.asarray(y, dtype=np.float64), 1e-4, 1.0 - 1e-4)
    return np.log(y) - np.log1p(-y)


# endregion


# region Types
class VoxelField:
    """
    Optimizable grid of raw parameters over an axis-aligned box.

    Readers must not overlap a parameter update; the trainer only writes between steps.
    """

    def __init__(self, lower: NDArray[np.float64], upper: NDArray[np.float64], params: NDArray[np.float64]) -> None:
        """
        Initialize the field.

        :param lower: Box corner with the smallest coordinates.
        :param upper: Box corner with the largest coordinates.
        :param params: Raw parameters of shape (nx, ny, nz, 5).
        :raises InputError: if the box is empty or a resolution is below 2.
        """
        self._lower: NDArray[np.float64] = np.asarray(lower, dtype=np.float64).reshape(3)
        self._upper: NDArray[np.float64] = np.asarray(upper, dtype=np.float64).reshape(3)
        if np.any(self._upper - self._lower <= 0):
            raise InputError(f"Field bounds must have a positive extent, got {self._lower} .. {self._upper}")
        self.params: NDArray[np.float64] = np.asarray(params, dtype=np.float64)
        if self.params.ndim != 4 or self.params.shape[3] != CHANNELS or min(self.params.shape[:3]) < 2:
            raise InputError(f"Field parameters must have shape (nx>=2, ny>=2, nz>=2, 5), got {self.params.shape}")

    @property
    def lower(self) -> NDArray[np.float64]:
        """
        Returns the lower box corner.

        :return: 3-vector.
        """
        return self._lower

    @property
    def upper(self) -> NDArray[np.float64]:
        """
        Returns the upper box corner.

        :return: 3-vector.
        """
        return self._upper

    @property
    def resolution(self) -> tuple[int, int, int]:
        """
        Returns the voxel count per axis.

        :return: (nx, ny, nz).
        """
        nx, ny, nz = self.params.shape[:3]
        return int(nx), int(ny), int(nz)

    @property
    def voxel_size(self) -> NDArray[np.float64]:
        """
        Returns the voxel edge lengths.

        :return: 3-vector.
        """
        return (self._upper - self._lower) / np.array(self.resolution, dtype=np.float64)

    @property
    def n_voxels(self) -> int:
        """
        Returns the number of voxels.

        :return: nx * ny * nz.
        """
        nx, ny, nz = self.resolution
        return nx * ny * nz

    @property
    def flat_params(self) -> NDArray[np.float64]:
        """
        Returns a (n_voxels, 5) view of the parameters, voxel id = (ix * ny + iy) * nz + iz.

        :return: Writable view.
        """
        return self.params.reshape(self.n_voxels, CHANNELS)

    def voxel_center(self, index: tuple[int, int, int]) -> NDArray[np.float64]:
        """
        Returns the world position of a voxel center.

        :param index: (ix, iy, iz).
        :return: 3-vector.
        """
        return self._lower + (np.asarray(index, dtype=np.float64) + 0.5) * self.voxel_size

    def copy(self) -> "VoxelField":
        """
        Returns a field with a copy of the parameters.

        :return: VoxelField.
        """
        return VoxelField(lower=self._lower.copy(), upper=self._upper.copy(), params=self.params.copy())


class FieldSample(NamedTuple):
    """
    Activated field values at one point.

    :param sigma: Density in 1/m.
    :param color: Linear RGB.
    :param visibility: Visibility in (0, 1).
    """

    sigma: float
    color: NDArray[np.float64]
    visibility: float


class ParamGrad(NamedTuple):
    """
    Derivatives of a field sample with respect to the raw parameters of the surrounding voxels.

    The derivative of channel ch with respect to voxel_ids[k] is weights[k] * activation_derivs[ch].

    :param voxel_ids: Flat ids of the 8 corner voxels, empty outside the bounds.
    :param weights: Trilinear weights of the corners.
    :param activation_derivs: Activation derivatives at the interpolated raw values, one per channel.
    """

    voxel_ids: NDArray[np.int64]
    weights: NDArray[np.float64]
    activation_derivs: NDArray[np.float64]

    def jacobian(self) -> NDArray[np.float64]:
        """
        Returns the full derivative table.

        :return: Array of shape (len(voxel_ids), 5).
        """
        return self.weights[:, None] * self.activation_derivs[None, :]


class PointQuery(NamedTuple):
    """
    Batched field query result.

    :param raw: Interpolated raw parameters of shape (N, 5).
    :param sigma: Densities (N,).
    :param color: Colors (N, 3).
    :param visibility: Visibilities (N,).
    :param voxel_ids: Corner voxel ids (N, 8).
    :param weights: Corner weights (N, 8), zero for points outside the bounds.
    :param inside: Mask of points inside the bounds (N,).
    """

    raw: NDArray[np.float64]
    sigma: NDArray[np.float64]
    color: NDArray[np.float64]
    visibility: NDArray[np.float64]
    voxel_ids: NDArray[np.int64]
    weights: NDArray[np.float64]
    inside: NDArray[np.bool_]


# endregion


# region Operations
def field_new(
    lower: NDArray[np.float64],
    upper: NDArray[np.float64],
    resolution: tuple[int, ...],
    sigma_raw_init: float = -2.0,
    color_raw_init: float = 0.0,
    v_raw_init: float = 10.0,
) -> VoxelField:
    """
    Returns a field with every voxel set to the given raw values.

    :param lower: Box corner with the smallest coordinates.
    :param upper: Box corner with the largest coordinates.
    :param resolution: Voxel count per axis, at least 2.
    :param sigma_raw_init: Raw density of every voxel.
    :param color_raw_init: Raw value of every color channel.
    :param v_raw_init: Raw visibility, large values disable masking.
    :return: VoxelField.
    :raises InputError: if the box or the resolution are invalid.
    """
    if len(resolution) != 3 or min(resolution) < 2:
        raise InputError(f"Resolution must have 3 entries of at least 2, got {tuple(resolution)}")
    params: NDArray[np.float64] = np.empty((*[int(n) for n in resolution], CHANNELS), dtype=np.float64)
    params[..., 0] = sigma_raw_init
    params[..., 1:4] = color_raw_init
    params[..., 4] = v_raw_init
    return VoxelField(lower=lower, upper=upper, params=params)


def _corners(
    field: VoxelField, points: NDArray[np.float64]
) -> tuple[NDArray[np.int64], NDArray[np.float64], NDArray[np.bool_]]:
    """
    Returns the corner voxel ids and trilinear weights of every point.

    Points between the outermost voxel centers and the box faces use the border voxels.

    :param field: Field.
    :param points: Points of shape (N, 3).
    :return: Voxel ids (N, 8), weights (N, 8) and the inside mask (N,).
    """
    pts: NDArray[np.float64] = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    inside: NDArray[np.bool_] = np.all((pts >= field.lower) & (pts <= field.upper), axis=1)
    res: NDArray[np.int64] = np.array(field.resolution, dtype=np.int64)
    grid: NDArray[np.float64] = (pts - field.lower) / field.voxel_size - 0.5
    grid = np.clip(np.nan_to_num(grid, nan=0.0, posinf=0.0, neginf=0.0), 0.0, (res - 1).astype(np.float64))
    base: NDArray[np.int64] = np.minimum(np.floor(grid).astype(np.int64), res - 2)
    frac: NDArray[np.float64] = grid - base
    _, ny, nz = field.resolution
    ids: list[NDArray[np.int64]] = []
    weights: list[NDArray[np.float64]] = []
    for dx in (0, 1):
        wx: NDArray[np.float64] = frac[:, 0] if dx else 1.0 - frac[:, 0]
        for dy in (0, 1):
            wy: NDArray[np.float64] = frac[:, 1] if dy else 1.0 - frac[:, 1]
            for dz in (0, 1):
                wz: NDArray[np.float64] = frac[:, 2] if dz else 1.0 - frac[:, 2]
                ids.append(((base[:, 0] + dx) * ny + (base[:, 1] + dy)) * nz + (base[:, 2] + dz))
                weights.append(wx * wy * wz)
    weight_table: NDArray[np.float64] = np.stack(weights, axis=1) * inside[:, None]
    return np.stack(ids, axis=1), weight_table, inside


def query_points(field: VoxelField, points: NDArray[np.float64]) -> PointQuery:
    """
    Evaluates the field at many points.

    :param field: Field.
    :param points: Points of shape (N, 3).
    :return: PointQuery; points outside the bounds give sigma 0, color 0.5 and visibility 1.
    """
    voxel_ids, weights, inside = _corners(field=field, points=points)
    raw: NDArray[np.float64] = np.einsum("nk,nkc->nc", weights, field.flat_params[voxel_ids])
    sigma: NDArray[np.float64] = np.where(inside, softplus(raw[:, 0]), 0.0)
    color: NDArray[np.float64] = np.where(inside[:, None], sigmoid(raw[:, 1:4]), _OUTSIDE_COLOR)
    visibility: NDArray[np.float64] = np.where(inside, sigmoid(raw[:, 4]), 1.0)
    return PointQuery(
        raw=raw,
        sigma=sigma,
        color=color,
        visibility=visibility,
        voxel_ids=voxel_ids,
        weights=weights,
        inside=inside,
    )


def field_sample(field: VoxelField, x: NDArray[np.float64]) -> FieldSample:
    """
    Returns the activated field values at one point.

    :param field: Field.
    :param x: Point.
    :return: FieldSample.
    """
    query: PointQuery = query_points(field=field, points=np.asarray(x, dtype=np.float64).reshape(1, 3))
    return FieldSample(
        sigma=float(query.sigma[0]), color=query.color[0].copy(), visibility=float(query.visibility[0])
    )


def field_param_grad(field: VoxelField, x: NDArray[np.float64]) -> ParamGrad:
    """
    Returns the derivatives of the sample at x with respect to the raw parameters of its 8 corner voxels.

    :param field: Field.
    :param x: Point.
    :return: ParamGrad, empty when x is outside the bounds.
    """
    query: PointQuery = query_points(field=field, points=np.asarray(x, dtype=np.float64).reshape(1, 3))
    if not query.inside[0]:
        return ParamGrad(voxel_ids=np.zeros(0, dtype=np.int64), weights=np.zeros(0), activation_derivs=np.zeros(5))
    raw: NDArray[np.float64] = query.raw[0]
    squashed: NDArray[np.float64] = sigmoid(raw[1:])
    derivs: NDArray[np.float64] = np.concatenate([[sigmoid(raw[0])], squashed * (1.0 - squashed)])
    return ParamGrad(voxel_ids=query.voxel_ids[0].copy(), weights=query.weights[0].copy(), activation_derivs=derivs)


def export_points(field: VoxelField, sigma_threshold: float, stride: int = 1, oversample: int = 1) -> PointCloud:
    """
    Samples the density over a regular grid and keeps the points with sufficient density.

    The grid starts at the first voxel center and steps stride / oversample voxels per axis.

    :param field: Field.
    :param sigma_threshold: Minimum density of a kept point.
    :param stride: Grid step in voxels.
    :param oversample: Subdivisions per step.
    :return: PointCloud with the field color of every kept point.
    :raises InputError: if the threshold is not positive or the steps are below 1.
    """
    if not sigma_threshold > 0:
        raise InputError(f"sigma_threshold must be positive, got {sigma_threshold}")
    if stride < 1 or oversample < 1:
        raise InputError(f"stride and oversample must be at least 1, got {stride} and {oversample}")
    step: float = stride / oversample
    axes: list[NDArray[np.float64]] = [
        field.lower[a] + (np.arange(0.0, n - 1 + 1e-9, step) + 0.5) * field.voxel_size[a]
        for a, n in enumerate(field.resolution)
    ]
    positions: list[NDArray[np.float64]] = []
    colors: list[NDArray[np.float64]] = []
    # One x slab at a time keeps memory bounded
    for x in axes[0]:
        gy, gz = np.meshgrid(axes[1], axes[2], indexing="ij")
        slab: NDArray[np.float64] = np.stack([np.full(gy.size, x), gy.ravel(), gz.ravel()], axis=1)
        query: PointQuery = query_points(field=field, points=slab)
        keep: NDArray[np.bool_] = query.sigma >= sigma_threshold
        positions.append(slab[keep])
        colors.append(query.color[keep])
    return PointCloud(positions=np.concatenate(positions), colors=np.concatenate(colors))


# endregion


# region Checkpoints
def save_checkpoint(path: Path, field: VoxelField) -> None:
    """
    Writes the field: "CNPL", version, bounds (6 f64), resolution (3 u32), then f32 raw parameters
    in x-fastest order with the 5 channels interleaved per voxel. All little-endian.

    :param path: Output file.
    :param field: Field.
    :raises StorageError: if the file cannot be written.
    """
    nx, ny, nz = field.resolution
    header: bytes = _HEADER.pack(_MAGIC, _VERSION, *field.lower, *field.upper, nx, ny, nz)
    body: bytes = np.ascontiguousarray(field.params.transpose(2, 1, 0, 3)).astype("<f4").tobytes()
    target: Path = Path(path)
    tmp: Path = target.with_name(target.name + ".tmp")
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(header + body)
        tmp.replace(target)
    except OSError as exc:
        raise StorageError(f"Cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path: Path) -> VoxelField:
    """
    Reads a field written by save_checkpoint.

    :param path: Checkpoint file.
    :return: VoxelField.
    :raises StorageError: if the file cannot be read or has a wrong layout.
    """
    try:
        raw: bytes = Path(path).read_bytes()
    except OSError as exc:
        raise StorageError(f"Cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise StorageError(f"Checkpoint {path} is truncated")
    magic, version, x0, y0, z0, x1, y1, z1, nx, ny, nz = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise StorageError(f"{path} is not a field checkpoint (magic {magic!r}, version {version})")
    expected: int = _HEADER.size + nx * ny * nz * CHANNELS * 4
    if len(raw) != expected:
        raise StorageError(f"Checkpoint {path} has {len(raw)} bytes, expected {expected}")
    params: NDArray[np.float64] = (
        np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
        .astype(np.float64)
        .reshape(nz, ny, nx, CHANNELS)
        .transpose(2, 1, 0, 3)
        .copy()
    )
    return VoxelField(lower=np.array([x0, y0, z0]), upper=np.array([x1, y1, z1]), params=params)


# endregion


# region Layout
def field_bounds(config: FieldConfig, dtm: Dtm) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Returns the field box: the explicit bounds of the config, or the terrain footprint from one meter
    below the lowest terrain point up to height_above_ground above it.

    :param config: Field layout.
    :param dtm: Terrain model.
    :return: Lower and upper corners.
    :raises InputError: if explicit bounds do not have 6 entries.
    """
    if config.bounds:
        if len(config.bounds) != 6:
            raise InputError(f"Field bounds must have 6 entries, got {len(config.bounds)}")
        return np.array(config.bounds[:3], dtype=np.float64), np.array(config.bounds[3:], dtype=np.float64)
    x0, y0, x1, y1 = dtm.footprint
    z0: float = float(dtm.heights.min())
    return np.array([x0, y0, z0 - 1.0]), np.array([x1, y1, z0 + config.height_above_ground])


def field_from_config(config: FieldConfig, dtm: Dtm) -> VoxelField:
    """
    Returns a freshly initialized field laid out over the terrain.

    :param config: Field layout and initial raw values.
    :param dtm: Terrain model.
    :return: VoxelField.
    """
    lower, upper = field_bounds(config=config, dtm=dtm)
    return field_new(
        lower=lower,
        upper=upper,
        resolution=tuple(int(n) for n in config.resolution),
        sigma_raw_init=config.sigma_raw_init,
        color_raw_init=config.color_raw_init,
        v_raw_init=config.v_raw_init,
    )


# endregion
