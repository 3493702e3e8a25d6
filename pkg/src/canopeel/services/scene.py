"""Records of the analytic forest scene and their JSON form."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from canopeel.misc.exceptions import InputError, StorageError
from canopeel.services.geometry import Dtm, dtm_heights

__all__: tuple[str, ...] = (
    "AnalyticScene",
    "CanopyBlob",
    "GroundTexture",
    "Stem",
    "SunLight",
    "Target",
    "load_scene",
    "save_scene",
)


def _vec(values: Any, size: int, name: str) -> tuple[float, ...]:
    result: tuple[float, ...] = tuple(float(v) for v in values)
    if len(result) != size:
        raise InputError(f"{name} must have {size} entries, got {len(result)}")
    return result


# region Types
@dataclass(frozen=True)
class Stem:
    """
    Vertical opaque cylinder with a flat top.

    :param base: (x, y) of the axis.
    :param base_z: Terrain height at the base.
    :param height: Height above base_z in meters.
    :param radius: Radius in meters.
    :param albedo: Linear RGB.
    """

    base: tuple[float, ...]
    base_z: float
    height: float
    radius: float
    albedo: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", _vec(self.base, 2, "Stem base"))
        object.__setattr__(self, "albedo", _vec(self.albedo, 3, "Stem albedo"))
        if not self.height > 0 or not self.radius > 0:
            raise InputError(f"Stem height and radius must be positive, got {self.height} and {self.radius}")

    @property
    def top(self) -> float:
        """
        Returns the z of the top cap.

        :return: base_z + height.
        """
        return self.base_z + self.height


@dataclass(frozen=True)
class CanopyBlob:
    """
    Translucent ellipsoid acting as one layer of opacity alpha where a ray enters it.

    :param center: Center.
    :param radii: Semi-axes along x, y and z.
    :param albedo: Linear RGB.
    :param opacity: Layer opacity in (0, 1).
    """

    center: tuple[float, ...]
    radii: tuple[float, ...]
    albedo: tuple[float, ...]
    opacity: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vec(self.center, 3, "Blob center"))
        object.__setattr__(self, "radii", _vec(self.radii, 3, "Blob radii"))
        object.__setattr__(self, "albedo", _vec(self.albedo, 3, "Blob albedo"))
        if not 0.0 < self.opacity < 1.0:
            raise InputError(f"Blob opacity must lie in (0, 1), got {self.opacity}")
        if min(self.radii) <= 0:
            raise InputError(f"Blob radii must be positive, got {self.radii}")


@dataclass(frozen=True)
class Target:
    """
    Axis-aligned colored rectangle lying on the terrain.

    :param center: (x, y) center.
    :param half_size: Half extents along x and y.
    :param albedo: Linear RGB replacing the ground albedo.
    """

    center: tuple[float, ...]
    half_size: tuple[float, ...]
    albedo: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vec(self.center, 2, "Target center"))
        object.__setattr__(self, "half_size", _vec(self.half_size, 2, "Target half size"))
        object.__setattr__(self, "albedo", _vec(self.albedo, 3, "Target albedo"))

    def contains(self, xs: NDArray[np.float64], ys: NDArray[np.float64]) -> NDArray[np.bool_]:
        """
        Returns which points lie on the rectangle.

        :param xs: World x.
        :param ys: World y.
        :return: Mask shaped like xs.
        """
        return (np.abs(xs - self.center[0]) <= self.half_size[0]) & (np.abs(ys - self.center[1]) <= self.half_size[1])


@dataclass(frozen=True)
class SunLight:
    """
    Directional light casting hard shadows on the terrain.

    :param elevation_deg: Elevation above the horizon.
    :param azimuth_deg: Azimuth counterclockwise from +x.
    :param lit_gain: Ground radiance gain in full sun.
    :param shadow_gain: Ground radiance gain in full shadow.
    """

    elevation_deg: float
    azimuth_deg: float
    lit_gain: float
    shadow_gain: float

    def __post_init__(self) -> None:
        if not 0.0 < self.elevation_deg <= 90.0:
            raise InputError(f"Sun elevation must lie in (0, 90], got {self.elevation_deg}")

    @property
    def direction(self) -> NDArray[np.float64]:
        """
        Returns the unit vector pointing toward the sun.

        :return: 3-vector.
        """
        el: float = np.deg2rad(self.elevation_deg)
        az: float = np.deg2rad(self.azimuth_deg)
        return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


@dataclass(frozen=True, eq=False)
class GroundTexture:
    """
    Value noise albedo: a lattice of random factors interpolated with smoothstep weights.

    :param origin: World (x, y) of lattice node (0, 0).
    :param cell: Lattice spacing in meters.
    :param values: Lattice values in [0, 1] of shape (rows, cols).
    :param color: Mean albedo, linear RGB.
    :param amplitude: Relative albedo variation.
    """

    origin: tuple[float, ...]
    cell: float
    values: NDArray[np.float64]
    color: tuple[float, ...]
    amplitude: float = 0.35

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", _vec(self.origin, 2, "Texture origin"))
        object.__setattr__(self, "color", _vec(self.color, 3, "Ground color"))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if not self.cell > 0 or self.values.ndim != 2 or min(self.values.shape) < 2:
            raise InputError("Ground texture needs a positive cell and at least a 2x2 lattice")

    def albedo(self, xs: NDArray[np.float64], ys: NDArray[np.float64]) -> NDArray[np.float64]:
        """
        Returns the ground albedo at world points.

        :param xs: World x.
        :param ys: World y.
        :return: Linear RGB of shape (len(xs), 3).
        """
        rows, cols = self.values.shape
        gx: NDArray[np.float64] = np.clip((np.asarray(xs) - self.origin[0]) / self.cell, 0.0, cols - 1.0)
        gy: NDArray[np.float64] = np.clip((np.asarray(ys) - self.origin[1]) / self.cell, 0.0, rows - 1.0)
        c0: NDArray[np.int64] = np.minimum(np.floor(gx).astype(np.int64), cols - 2)
        r0: NDArray[np.int64] = np.minimum(np.floor(gy).astype(np.int64), rows - 2)
        tx: NDArray[np.float64] = gx - c0
        ty: NDArray[np.float64] = gy - r0
        tx = tx * tx * (3.0 - 2.0 * tx)
        ty = ty * ty * (3.0 - 2.0 * ty)
        v: NDArray[np.float64] = self.values
        top: NDArray[np.float64] = v[r0, c0] * (1.0 - tx) + v[r0, c0 + 1] * tx
        bottom: NDArray[np.float64] = v[r0 + 1, c0] * (1.0 - tx) + v[r0 + 1, c0 + 1] * tx
        noise: NDArray[np.float64] = top * (1.0 - ty) + bottom * ty
        factor: NDArray[np.float64] = 1.0 + self.amplitude * (2.0 * noise - 1.0)
        return np.clip(factor[:, None] * np.array(self.color)[None, :], 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class AnalyticScene:
    """
    Synthetic forest with closed-form geometry.

    :param dtm: Terrain.
    :param texture: Ground albedo.
    :param stems: Tree stems.
    :param canopy: Canopy blobs.
    :param targets: Ground targets.
    :param background: Color of rays leaving the scene.
    :param sun: Direct light, None for diffuse lighting.
    :raises InputError: if a stem or blob lies outside the terrain footprint.
    """

    dtm: Dtm
    texture: GroundTexture
    stems: tuple[Stem, ...] = ()
    canopy: tuple[CanopyBlob, ...] = ()
    targets: tuple[Target, ...] = ()
    background: tuple[float, ...] = (0.5, 0.5, 0.5)
    sun: SunLight | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "stems", tuple(self.stems))
        object.__setattr__(self, "canopy", tuple(self.canopy))
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "background", _vec(self.background, 3, "Background"))
        x0, y0, x1, y1 = self.dtm.footprint
        for stem in self.stems:
            if not (x0 <= stem.base[0] <= x1 and y0 <= stem.base[1] <= y1):
                raise InputError(f"Stem at {stem.base} lies outside the terrain footprint")
        for blob in self.canopy:
            if not (x0 <= blob.center[0] <= x1 and y0 <= blob.center[1] <= y1):
                raise InputError(f"Canopy blob at {blob.center[:2]} lies outside the terrain footprint")

    @property
    def top(self) -> float:
        """
        Returns the highest z of any scene geometry.

        :return: Height in meters.
        """
        tops: list[float] = [float(self.dtm.heights.max())]
        tops += [stem.top for stem in self.stems]
        tops += [blob.center[2] + blob.radii[2] for blob in self.canopy]
        return max(tops)

    def ground_color(
        self, xs: NDArray[np.float64], ys: NDArray[np.float64], targets: bool = True
    ) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
        """
        Returns the unshaded ground albedo with the targets painted over it.

        :param xs: World x.
        :param ys: World y.
        :param targets: Paint the targets.
        :return: Linear RGB (N, 3) and the mask of points on a target.
        """
        color: NDArray[np.float64] = self.texture.albedo(xs=xs, ys=ys)
        on_target: NDArray[np.bool_] = np.zeros(len(np.atleast_1d(xs)), dtype=bool)
        if targets:
            for target in self.targets:
                inside: NDArray[np.bool_] = target.contains(xs=xs, ys=ys)
                color[inside] = target.albedo
                on_target |= inside
        return color, on_target

    def base_height(self, x: float, y: float) -> float:
        """
        Returns the terrain height at a point of the footprint.

        :param x: World x.
        :param y: World y.
        :return: Height.
        """
        heights, _ = dtm_heights(dtm=self.dtm, xs=np.array([x]), ys=np.array([y]))
        return float(heights[0])


# endregion


# region Files
def _scene_to_dict(scene: AnalyticScene) -> dict[str, Any]:
    dtm: Dtm = scene.dtm
    return {
        "dtm": {
            "origin": [float(v) for v in dtm.origin],
            "cell_size": dtm.cell_size,
            "rows": dtm.rows,
            "cols": dtm.cols,
            "heights": [float(v) for v in dtm.heights.ravel()],
        },
        "texture": {
            "origin": list(scene.texture.origin),
            "cell": scene.texture.cell,
            "shape": list(scene.texture.values.shape),
            "values": [float(v) for v in scene.texture.values.ravel()],
            "color": list(scene.texture.color),
            "amplitude": scene.texture.amplitude,
        },
        "stems": [
            {"base": list(s.base), "base_z": s.base_z, "height": s.height, "radius": s.radius, "albedo": list(s.albedo)}
            for s in scene.stems
        ],
        "canopy": [
            {"center": list(b.center), "radii": list(b.radii), "albedo": list(b.albedo), "opacity": b.opacity}
            for b in scene.canopy
        ],
        "targets": [
            {"center": list(t.center), "half_size": list(t.half_size), "albedo": list(t.albedo)} for t in scene.targets
        ],
        "background": list(scene.background),
        "sun": None
        if scene.sun is None
        else {
            "elevation_deg": scene.sun.elevation_deg,
            "azimuth_deg": scene.sun.azimuth_deg,
            "lit_gain": scene.sun.lit_gain,
            "shadow_gain": scene.sun.shadow_gain,
        },
    }


def _scene_from_dict(data: dict[str, Any]) -> AnalyticScene:
    grid: dict[str, Any] = data["dtm"]
    tex: dict[str, Any] = data["texture"]
    return AnalyticScene(
        dtm=Dtm(
            origin=np.asarray(grid["origin"]),
            cell_size=float(grid["cell_size"]),
            heights=np.asarray(grid["heights"], dtype=np.float64).reshape(int(grid["rows"]), int(grid["cols"])),
        ),
        texture=GroundTexture(
            origin=tex["origin"],
            cell=float(tex["cell"]),
            values=np.asarray(tex["values"], dtype=np.float64).reshape(tex["shape"]),
            color=tex["color"],
            amplitude=float(tex["amplitude"]),
        ),
        stems=tuple(Stem(**s) for s in data["stems"]),
        canopy=tuple(CanopyBlob(**b) for b in data["canopy"]),
        targets=tuple(Target(**t) for t in data["targets"]),
        background=data["background"],
        sun=None if data.get("sun") is None else SunLight(**data["sun"]),
    )


def save_scene(path: Path, scene: AnalyticScene) -> None:
    """
    Writes the full scene record as JSON.

    :param path: Output file.
    :param scene: Scene.
    :raises StorageError: if the file cannot be written.
    """
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(json.dumps(_scene_to_dict(scene)), encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"Cannot write scene {path}: {exc}") from exc


def load_scene(path: Path) -> AnalyticScene:
    """
    Reads a scene record written by save_scene.

    :param path: Scene file.
    :return: AnalyticScene.
    :raises StorageError: if the file cannot be read or is malformed.
    """
    try:
        data: Any = json.loads(Path(path).read_text(encoding="utf-8"))
        return _scene_from_dict(data)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise StorageError(f"Cannot read scene {path}: {exc!r}") from exc


# endregion
