"""
Cameras, rays and the digital terrain model.

Conventions: the world frame is z-up in meters and DTM heights are z values. Cameras follow
the x-right, y-down, z-forward convention, poses map camera to world. Pixel p covers
[p, p + 1), its center p + 0.5 is what a ray passes through.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import NDArray

from canopeel.config import logger
from canopeel.misc.exceptions import InputError, StorageError

__all__: tuple[str, ...] = (
    "Camera",
    "Dtm",
    "DtmSample",
    "Ray",
    "RayBundle",
    "camera_rays",
    "dtm_height",
    "dtm_heights",
    "ground_entries",
    "load_cameras",
    "load_dtm",
    "look_at_rotation",
    "pixel_grid",
    "project_points",
    "ray_for_pixel",
    "ray_ground_entry",
    "save_cameras",
    "save_dtm",
)

_DEFAULT_FAR: float = 1.0e4


# region Types
@dataclass(frozen=True, eq=False)
class Camera:
    """
    Pinhole camera.

    :param fx: Horizontal focal length in pixels.
    :param fy: Vertical focal length in pixels.
    :param cx: Principal point x in pixels.
    :param cy: Principal point y in pixels.
    :param width: Image width in pixels.
    :param height: Image height in pixels.
    :param rotation: Camera-to-world rotation, columns are the camera axes in world coordinates.
    :param translation: Camera center in world coordinates.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: NDArray[np.float64] = field(default_factory=lambda: np.eye(3))
    translation: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation: NDArray[np.float64] = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation: NDArray[np.float64] = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (self.fx > 0 and self.fy > 0):
            raise InputError(f"Focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise InputError(f"Principal point ({self.cx}, {self.cy}) outside a {self.width}x{self.height} image")
        if np.max(np.abs(rotation.T @ rotation - np.eye(3))) >= 1e-9 or np.linalg.det(rotation) <= 0:
            raise InputError("Camera rotation must be orthonormal with determinant +1")
        if not np.all(np.isfinite(translation)):
            raise InputError("Camera translation must be finite")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @property
    def pose(self) -> NDArray[np.float64]:
        """
        Returns the 4x4 camera-to-world transform.

        :return: Homogeneous transform.
        """
        pose: NDArray[np.float64] = np.eye(4)
        pose[:3, :3] = self.rotation
        pose[:3, 3] = self.translation
        return pose

    @property
    def center(self) -> NDArray[np.float64]:
        """
        Returns the camera center in world coordinates.

        :return: 3-vector.
        """
        return self.translation

    @property
    def optical_axis(self) -> NDArray[np.float64]:
        """
        Returns the viewing direction in world coordinates.

        :return: Unit 3-vector.
        """
        return self.rotation[:, 2].copy()

    @classmethod
    def from_pose(cls, fx: float, fy: float, cx: float, cy: float, width: int, height: int, pose: Any) -> "Camera":
        """
        Builds a camera from a 4x4 camera-to-world matrix or its 16 row-major numbers.

        :param fx: Horizontal focal length in pixels.
        :param fy: Vertical focal length in pixels.
        :param cx: Principal point x in pixels.
        :param cy: Principal point y in pixels.
        :param width: Image width in pixels.
        :param height: Image height in pixels.
        :param pose: Camera-to-world transform.
        :return: Camera.
        :raises InputError: if the pose does not have 16 numbers.
        """
        matrix: NDArray[np.float64] = np.asarray(pose, dtype=np.float64)
        if matrix.size != 16:
            raise InputError(f"A pose needs 16 numbers, got {matrix.size}")
        matrix = matrix.reshape(4, 4)
        return cls(
            fx=float(fx),
            fy=float(fy),
            cx=float(cx),
            cy=float(cy),
            width=int(width),
            height=int(height),
            rotation=matrix[:3, :3],
            translation=matrix[:3, 3],
        )


@dataclass(frozen=True, eq=False)
class Ray:
    """
    Parametric ray r(t) = o + t * d restricted to [t_near, t_far].

    :param origin: Origin in meters.
    :param direction: Unit direction.
    :param t_near: Near bound in meters.
    :param t_far: Far bound in meters.
    """

    origin: NDArray[np.float64]
    direction: NDArray[np.float64]
    t_near: float = 0.0
    t_far: float = _DEFAULT_FAR

    def __post_init__(self) -> None:
        origin: NDArray[np.float64] = np.array(self.origin, dtype=np.float64).reshape(3)
        direction: NDArray[np.float64] = np.array(self.direction, dtype=np.float64).reshape(3)
        if abs(float(np.linalg.norm(direction)) - 1.0) > 1e-9:
            raise InputError("Ray direction must be a unit vector")
        if not 0.0 <= self.t_near < self.t_far:
            raise InputError(f"Ray bounds must satisfy 0 <= t_near < t_far, got [{self.t_near}, {self.t_far}]")
        origin.setflags(write=False)
        direction.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)

    def at(self, t: float) -> NDArray[np.float64]:
        """
        Returns the point at parameter t.

        :param t: Ray parameter in meters.
        :return: 3-vector.
        """
        return self.origin + t * self.direction


@dataclass(frozen=True, eq=False)
class RayBundle:
    """
    A batch of rays stored as arrays.

    :param origins: Origins of shape (N, 3).
    :param directions: Unit directions of shape (N, 3).
    :param t_near: Near bounds of shape (N,).
    :param t_far: Far bounds of shape (N,).
    """

    origins: NDArray[np.float64]
    directions: NDArray[np.float64]
    t_near: NDArray[np.float64]
    t_far: NDArray[np.float64]

    def __len__(self) -> int:
        return int(self.origins.shape[0])

    def subset(self, index: Any) -> "RayBundle":
        """
        Returns the rays selected by an index or slice.

        :param index: Numpy index.
        :return: RayBundle.
        """
        return RayBundle(self.origins[index], self.directions[index], self.t_near[index], self.t_far[index])

    @classmethod
    def from_rays(cls, rays: list[Ray]) -> "RayBundle":
        """
        Stacks single rays into a bundle.

        :param rays: Rays.
        :return: RayBundle.
        """
        return cls(
            origins=np.array([r.origin for r in rays], dtype=np.float64).reshape(-1, 3),
            directions=np.array([r.direction for r in rays], dtype=np.float64).reshape(-1, 3),
            t_near=np.array([r.t_near for r in rays], dtype=np.float64),
            t_far=np.array([r.t_far for r in rays], dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class Dtm:
    """
    Raster of terrain heights, node (r, c) lies at (x0 + c * cell_size, y0 + r * cell_size).

    :param origin: World (x, y) of node (0, 0).
    :param cell_size: Node spacing in meters.
    :param heights: Heights of shape (rows, cols).
    """

    origin: NDArray[np.float64]
    cell_size: float
    heights: NDArray[np.float64]

    def __post_init__(self) -> None:
        origin: NDArray[np.float64] = np.array(self.origin, dtype=np.float64).reshape(2)
        heights: NDArray[np.float64] = np.array(self.heights, dtype=np.float64)
        if heights.ndim != 2 or heights.size == 0:
            raise InputError("DTM heights must be a non-empty 2D raster")
        if not self.cell_size > 0:
            raise InputError(f"DTM cell size must be positive, got {self.cell_size}")
        if not np.all(np.isfinite(heights)):
            raise InputError("DTM heights must be finite")
        origin.setflags(write=False)
        heights.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "heights", heights)

    @property
    def rows(self) -> int:
        """
        Returns the number of raster rows (along y).

        :return: Row count.
        """
        return int(self.heights.shape[0])

    @property
    def cols(self) -> int:
        """
        Returns the number of raster columns (along x).

        :return: Column count.
        """
        return int(self.heights.shape[1])

    @property
    def footprint(self) -> tuple[float, float, float, float]:
        """
        Returns the covered area.

        :return: (x_min, y_min, x_max, y_max).
        """
        x0, y0 = float(self.origin[0]), float(self.origin[1])
        return x0, y0, x0 + (self.cols - 1) * self.cell_size, y0 + (self.rows - 1) * self.cell_size


class DtmSample(NamedTuple):
    """
    Result of a height query.

    :param height: Interpolated height.
    :param clamped: True when the query was outside the footprint and clamped to its edge.
    """

    height: float
    clamped: bool


# endregion


# region Camera operations
def pixel_grid(camera: Camera) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Returns the integer pixel coordinates of every pixel in row-major order.

    :param camera: Camera.
    :return: Arrays px, py of length width * height.
    """
    py, px = np.meshgrid(np.arange(camera.height), np.arange(camera.width), indexing="ij")
    return px.ravel().astype(np.float64), py.ravel().astype(np.float64)


def camera_rays(
    camera: Camera,
    px: NDArray[np.float64] | None = None,
    py: NDArray[np.float64] | None = None,
    t_near: float = 0.0,
    t_far: float = _DEFAULT_FAR,
) -> RayBundle:
    """
    Returns the rays through the centers of the given pixels, all pixels when none are given.

    :param camera: Camera.
    :param px: Pixel x coordinates.
    :param py: Pixel y coordinates.
    :param t_near: Near bound of every ray.
    :param t_far: Far bound of every ray.
    :return: RayBundle.
    :raises InputError: if a pixel lies outside the image.
    """
    if px is None or py is None:
        px, py = pixel_grid(camera=camera)
    px = np.asarray(px, dtype=np.float64).ravel()
    py = np.asarray(py, dtype=np.float64).ravel()
    if np.any((px < 0) | (px >= camera.width) | (py < 0) | (py >= camera.height)):
        raise InputError(f"Pixel outside the {camera.width}x{camera.height} image")
    local: NDArray[np.float64] = np.stack(
        [(px + 0.5 - camera.cx) / camera.fx, (py + 0.5 - camera.cy) / camera.fy, np.ones_like(px)], axis=1
    )
    directions: NDArray[np.float64] = local @ camera.rotation.T
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    count: int = len(px)
    return RayBundle(
        origins=np.broadcast_to(camera.translation, (count, 3)).copy(),
        directions=directions,
        t_near=np.full(count, float(t_near)),
        t_far=np.full(count, float(t_far)),
    )


def ray_for_pixel(
    camera: Camera, px: float, py: float, t_near: float = 0.0, t_far: float = _DEFAULT_FAR
) -> Ray:
    """
    Returns the ray from the camera center through the center of pixel (px, py).

    :param camera: Camera.
    :param px: Pixel x coordinate, 0 <= px < width.
    :param py: Pixel y coordinate, 0 <= py < height.
    :param t_near: Near bound.
    :param t_far: Far bound.
    :return: Ray.
    :raises InputError: if the pixel lies outside the image.
    """
    bundle: RayBundle = camera_rays(camera=camera, px=np.array([px]), py=np.array([py]), t_near=t_near, t_far=t_far)
    return Ray(origin=bundle.origins[0], direction=bundle.directions[0], t_near=t_near, t_far=t_far)


def project_points(camera: Camera, points: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Projects world points to pixel coordinates, the inverse of ray_for_pixel.

    :param camera: Camera.
    :param points: World points of shape (N, 3).
    :return: Pixel coordinates px, py; points behind the camera give NaN.
    """
    local: NDArray[np.float64] = (np.asarray(points, dtype=np.float64).reshape(-1, 3) - camera.translation) @ (
        camera.rotation
    )
    depth: NDArray[np.float64] = np.where(local[:, 2] > 0, local[:, 2], np.nan)
    px: NDArray[np.float64] = camera.fx * local[:, 0] / depth + camera.cx - 0.5
    py: NDArray[np.float64] = camera.fy * local[:, 1] / depth + camera.cy - 0.5
    return px, py


def look_at_rotation(eye: NDArray[np.float64], target: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Returns the camera-to-world rotation of a camera at eye looking at target with +y world up in the image.

    :param eye: Camera center.
    :param target: Point on the optical axis.
    :return: 3x3 rotation.
    :raises InputError: if eye and target coincide.
    """
    forward: NDArray[np.float64] = np.asarray(target, dtype=np.float64) - np.asarray(eye, dtype=np.float64)
    norm: float = float(np.linalg.norm(forward))
    if norm == 0.0:
        raise InputError("Camera eye and target coincide")
    forward /= norm
    up_hint: NDArray[np.float64] = np.array([0.0, 1.0, 0.0])
    if abs(float(forward @ up_hint)) > 0.999:
        up_hint = np.array([0.0, 0.0, 1.0])
    down: NDArray[np.float64] = -(up_hint - (up_hint @ forward) * forward)
    down /= np.linalg.norm(down)
    right: NDArray[np.float64] = np.cross(down, forward)
    return np.stack([right, down, forward], axis=1)


# endregion


# region DTM operations
def dtm_heights(
    dtm: Dtm, xs: NDArray[np.float64], ys: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """
    Bilinear interpolation of the raster, queries outside the footprint are clamped to its edge.

    :param dtm: Terrain model.
    :param xs: World x coordinates.
    :param ys: World y coordinates.
    :return: Heights and a mask of clamped queries, both shaped like xs.
    """
    gx: NDArray[np.float64] = (np.asarray(xs, dtype=np.float64) - dtm.origin[0]) / dtm.cell_size
    gy: NDArray[np.float64] = (np.asarray(ys, dtype=np.float64) - dtm.origin[1]) / dtm.cell_size
    clamped: NDArray[np.bool_] = (gx < 0) | (gx > dtm.cols - 1) | (gy < 0) | (gy > dtm.rows - 1)
    gx = np.clip(gx, 0.0, dtm.cols - 1)
    gy = np.clip(gy, 0.0, dtm.rows - 1)
    c0: NDArray[np.int64] = np.clip(np.floor(gx).astype(np.int64), 0, max(dtm.cols - 2, 0))
    r0: NDArray[np.int64] = np.clip(np.floor(gy).astype(np.int64), 0, max(dtm.rows - 2, 0))
    c1: NDArray[np.int64] = np.minimum(c0 + 1, dtm.cols - 1)
    r1: NDArray[np.int64] = np.minimum(r0 + 1, dtm.rows - 1)
    tx: NDArray[np.float64] = gx - c0
    ty: NDArray[np.float64] = gy - r0
    h: NDArray[np.float64] = dtm.heights
    top: NDArray[np.float64] = h[r0, c0] * (1.0 - tx) + h[r0, c1] * tx
    bottom: NDArray[np.float64] = h[r1, c0] * (1.0 - tx) + h[r1, c1] * tx
    return top * (1.0 - ty) + bottom * ty, clamped


def dtm_height(dtm: Dtm, x: float, y: float) -> DtmSample:
    """
    Returns the terrain height at (x, y).

    :param dtm: Terrain model.
    :param x: World x.
    :param y: World y.
    :return: DtmSample, clamped is set for queries outside the footprint.
    """
    heights, clamped = dtm_heights(dtm=dtm, xs=np.array([x]), ys=np.array([y]))
    if clamped[0]:
        logger.warning(f"DTM query ({x:.3f}, {y:.3f}) outside the footprint, clamped to its edge")
    return DtmSample(height=float(heights[0]), clamped=bool(clamped[0]))


def _clearance(dtm: Dtm, rays: RayBundle, t: NDArray[np.float64], margin: float) -> NDArray[np.float64]:
    """
    Returns the height of the ray points above the surface dtm + margin.

    :param dtm: Terrain model.
    :param rays: Rays.
    :param t: Ray parameters, one per ray.
    :param margin: Offset above the terrain.
    :return: Signed clearance, <= 0 means at or below the surface.
    """
    points: NDArray[np.float64] = rays.origins + t[:, None] * rays.directions
    heights, _ = dtm_heights(dtm=dtm, xs=points[:, 0], ys=points[:, 1])
    return points[:, 2] - heights - margin


def _footprint_exit(dtm: Dtm, rays: RayBundle) -> NDArray[np.float64]:
    """
    Returns the parameter at which each ray leaves the footprint column, inf for vertical rays.

    :param dtm: Terrain model.
    :param rays: Rays.
    :return: Exit parameters.
    """
    x_min, y_min, x_max, y_max = dtm.footprint
    lo: NDArray[np.float64] = np.array([x_min, y_min])
    hi: NDArray[np.float64] = np.array([x_max, y_max])
    d: NDArray[np.float64] = rays.directions[:, :2]
    o: NDArray[np.float64] = rays.origins[:, :2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi: NDArray[np.float64] = np.where(d > 0, (hi - o) / d, np.where(d < 0, (lo - o) / d, np.inf))
    return np.min(t_hi, axis=1)


def ground_entries(rays: RayBundle, dtm: Dtm, margin: float) -> NDArray[np.float64]:
    """
    Returns, per ray, the first parameter where the ray descends to dtm + margin.

    The ray is marched at half a cell from t_near, the first step at or below the surface is
    refined by bisection to 1e-4 * cell_size. Rays starting at or below the surface enter at
    t_near. Rays that never reach it return t_far. Marching stops where the ray leaves the
    footprint column.

    :param rays: Rays.
    :param dtm: Terrain model.
    :param margin: Offset above the terrain in meters.
    :return: Entry parameters t_g.
    """
    count: int = len(rays)
    result: NDArray[np.float64] = rays.t_far.astype(np.float64).copy()
    if count == 0:
        return result
    step: float = dtm.cell_size / 2.0
    tolerance: float = 1e-4 * dtm.cell_size
    top: float = float(dtm.heights.max()) + margin
    bottom: float = float(dtm.heights.min()) + margin
    dz: NDArray[np.float64] = rays.directions[:, 2]
    oz: NDArray[np.float64] = rays.origins[:, 2]
    z_near: NDArray[np.float64] = oz + rays.t_near * dz
    with np.errstate(divide="ignore", invalid="ignore"):
        t_top: NDArray[np.float64] = np.where(dz < 0, (oz - top) / -dz, rays.t_near)
        t_bottom: NDArray[np.float64] = np.where(dz < 0, (oz - bottom) / -dz, np.inf)
    t_end: NDArray[np.float64] = np.minimum(np.minimum(rays.t_far, t_bottom + step), _footprint_exit(dtm, rays))
    under: NDArray[np.bool_] = _clearance(dtm, rays, rays.t_near, margin) <= 0
    result[under] = rays.t_near[under]
    active: NDArray[np.bool_] = ~under
    active &= ~((dz >= 0) & (z_near > top))
    active &= t_end > rays.t_near
    k: NDArray[np.float64] = np.where(
        dz < 0, np.maximum(np.floor(np.maximum(t_top - rays.t_near, 0.0) / step) - 1.0, 0.0), 0.0
    )
    lo: NDArray[np.float64] = rays.t_near.astype(np.float64).copy()
    hi: NDArray[np.float64] = np.full(count, np.nan)
    while np.any(active):
        idx: NDArray[np.int64] = np.flatnonzero(active)
        t_k: NDArray[np.float64] = np.minimum(rays.t_near[idx] + (k[idx] + 1.0) * step, t_end[idx])
        hit: NDArray[np.bool_] = _clearance(dtm, rays.subset(idx), t_k, margin) <= 0
        lo_candidate: NDArray[np.float64] = np.maximum(rays.t_near[idx] + k[idx] * step, rays.t_near[idx])
        hi[idx[hit]] = t_k[hit]
        lo[idx[hit]] = lo_candidate[hit]
        done: NDArray[np.bool_] = hit | (t_k >= t_end[idx])
        active[idx[done]] = False
        k[idx] += 1.0
    found: NDArray[np.int64] = np.flatnonzero(np.isfinite(hi))
    if len(found):
        sub: RayBundle = rays.subset(found)
        a: NDArray[np.float64] = lo[found]
        b: NDArray[np.float64] = hi[found]
        while np.any(b - a > tolerance):
            mid: NDArray[np.float64] = 0.5 * (a + b)
            below: NDArray[np.bool_] = _clearance(dtm, sub, mid, margin) <= 0
            b = np.where(below, mid, b)
            a = np.where(below, a, mid)
        result[found] = b
    return result


def ray_ground_entry(ray: Ray, dtm: Dtm, margin: float) -> float:
    """
    Returns t_g, the first parameter where the ray altitude falls to dtm_height + margin.

    :param ray: Ray.
    :param dtm: Terrain model.
    :param margin: Offset above the terrain in meters.
    :return: Entry parameter, t_far when the ray never enters.
    """
    bundle: RayBundle = RayBundle.from_rays([ray])
    return float(ground_entries(rays=bundle, dtm=dtm, margin=margin)[0])


# endregion


# region Files
def load_cameras(path: Path) -> list[tuple[Camera, str]]:
    """
    Reads a camera file: a JSON array of {fx, fy, cx, cy, width, height, pose, image}.

    :param path: Camera file.
    :return: Cameras with their image paths relative to the file.
    :raises StorageError: if the file cannot be read or a record is malformed.
    """
    try:
        records: Any = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise StorageError(f"Cannot read cameras {path}: {exc}") from exc
    if not isinstance(records, list):
        raise StorageError(f"Cameras file {path} must contain a JSON array")
    cameras: list[tuple[Camera, str]] = []
    for number, record in enumerate(records):
        try:
            camera: Camera = Camera.from_pose(
                fx=record["fx"],
                fy=record["fy"],
                cx=record["cx"],
                cy=record["cy"],
                width=record["width"],
                height=record["height"],
                pose=record["pose"],
            )
        except (KeyError, TypeError) as exc:
            raise StorageError(f"Camera record {number} in {path} is malformed: {exc!r}") from exc
        cameras.append((camera, str(record.get("image", ""))))
    return cameras


def save_cameras(path: Path, cameras: list[tuple[Camera, str]]) -> None:
    """
    Writes a camera file.

    :param path: Camera file.
    :param cameras: Cameras with their image paths relative to the file.
    :raises StorageError: if the file cannot be written.
    """
    records: list[dict[str, Any]] = [
        {
            "fx": camera.fx,
            "fy": camera.fy,
            "cx": camera.cx,
            "cy": camera.cy,
            "width": camera.width,
            "height": camera.height,
            "pose": [float(v) for v in camera.pose.ravel()],
            "image": image,
        }
        for camera, image in cameras
    ]
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(records, indent=1), encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"Cannot write cameras {path}: {exc}") from exc


def load_dtm(path: Path) -> Dtm:
    """
    Reads a DTM file: JSON {origin, cell_size, rows, cols, heights}.

    :param path: DTM file.
    :return: Dtm.
    :raises StorageError: if the file cannot be read or rows * cols does not match the raster.
    """
    try:
        data: Any = json.loads(Path(path).read_text(encoding="utf-8"))
        rows, cols = int(data["rows"]), int(data["cols"])
        heights: NDArray[np.float64] = np.asarray(data["heights"], dtype=np.float64)
        origin: list[float] = data["origin"]
        cell_size: float = float(data["cell_size"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise StorageError(f"Cannot read DTM {path}: {exc!r}") from exc
    if heights.size != rows * cols:
        raise StorageError(f"DTM {path}: raster has {heights.size} heights, expected {rows}x{cols}")
    return Dtm(origin=np.asarray(origin), cell_size=cell_size, heights=heights.reshape(rows, cols))


def save_dtm(path: Path, dtm: Dtm) -> None:
    """
    Writes a DTM file.

    :param path: DTM file.
    :param dtm: Terrain model.
    :raises StorageError: if the file cannot be written.
    """
    data: dict[str, Any] = {
        "origin": [float(v) for v in dtm.origin],
        "cell_size": dtm.cell_size,
        "rows": dtm.rows,
        "cols": dtm.cols,
        "heights": [float(v) for v in dtm.heights.ravel()],
    }
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(data), encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"Cannot write DTM {path}: {exc}") from exc


# endregion
