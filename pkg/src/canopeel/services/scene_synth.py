"""
Procedural forest generation, the closed-form oracle renderer and synthetic image captures.

The oracle intersects camera rays with the terrain, the stem cylinders and the canopy
ellipsoids analytically. Every blob a ray enters contributes one layer of its opacity; layers
in front of the first opaque surface are alpha-composited front to back.
"""

from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray
from scipy.ndimage import gaussian_filter

from canopeel.config import logger
from canopeel.misc.dataclasses import CaptureConfig, FieldConfig, ForestParams
from canopeel.misc.exceptions import InputError
from canopeel.misc.parallel import run_chunks
from canopeel.services.dataset import Dataset, Views
from canopeel.services.field import VoxelField, field_bounds, field_new, inverse_sigmoid, inverse_softplus
from canopeel.services.geometry import (
    Camera,
    Dtm,
    RayBundle,
    camera_rays,
    dtm_heights,
    ground_entries,
    look_at_rotation,
)
from canopeel.services.scene import AnalyticScene, CanopyBlob, GroundTexture, Stem, SunLight, Target

__all__: tuple[str, ...] = (
    "Layers",
    "OracleRender",
    "capture_cameras",
    "generate_capture",
    "generate_forest",
    "oracle_render",
    "oracle_render_layers",
    "scene_to_field",
)

_FAR: float = 1.0e4
_EPS: float = 1.0e-6
_CHUNK: int = 4096
_TARGET_PALETTE: tuple[tuple[float, float, float], ...] = (
    (0.85, 0.08, 0.06),
    (0.08, 0.25, 0.85),
    (0.90, 0.80, 0.05),
    (0.80, 0.15, 0.70),
)


class Layers(NamedTuple):
    """
    Scene parts the oracle draws.

    :param canopy: Canopy blobs.
    :param stems: Stem cylinders.
    :param targets: Target rectangles, the plain ground albedo shows through when disabled.
    :param terrain: Terrain surface.
    """

    canopy: bool = True
    stems: bool = True
    targets: bool = True
    terrain: bool = True

    @classmethod
    def nothing(cls) -> "Layers":
        """
        Returns the layer set with every part disabled.

        :return: Layers.
        """
        return cls(canopy=False, stems=False, targets=False, terrain=False)


class OracleRender(NamedTuple):
    """
    Closed-form render of one camera.

    :param image: Linear image (H, W, 3).
    :param segmentation: 1 where the front-most surface is not a canopy blob, else 0.
    :param target_mask: 1 where the first opaque surface is a target, else 0.
    """

    image: NDArray[np.float64]
    segmentation: NDArray[np.float64]
    target_mask: NDArray[np.float64]


# region Forest
def _check_range(name: str, values: tuple[float, ...], low: float, high: float, open_low: bool = False) -> None:
    if len(values) != 2 or values[0] > values[1]:
        raise InputError(f"{name} must be an ordered pair, got {values}")
    below: bool = values[0] <= low if open_low else values[0] < low
    if below or values[1] > high:
        raise InputError(f"{name} must lie within {'(' if open_low else '['}{low}, {high}], got {values}")


def _terrain(rng: np.random.Generator, extent: float, relief: float, cell: float) -> Dtm:
    nodes: int = int(np.ceil(extent / cell)) + 1
    cell_size: float = extent / (nodes - 1)
    noise: NDArray[np.float64] = gaussian_filter(rng.standard_normal((nodes, nodes)), sigma=4.0 / cell_size)
    span: float = float(np.ptp(noise))
    heights: NDArray[np.float64] = relief * (noise - noise.min()) / span if span > 0 else np.zeros_like(noise)
    return Dtm(origin=np.array([-extent / 2.0, -extent / 2.0]), cell_size=cell_size, heights=heights)


def _hex_lattice(low: float, high: float, spacing: float) -> NDArray[np.float64]:
    points: list[tuple[float, float]] = []
    for row, y in enumerate(np.arange(low, high + 1e-9, spacing * np.sqrt(3.0) / 2.0)):
        shift: float = spacing / 2.0 if row % 2 else 0.0
        points.extend((float(x), float(y)) for x in np.arange(low + shift, high + 1e-9, spacing))
    return np.array(points, dtype=np.float64).reshape(-1, 2)


def _place_stems(
    rng: np.random.Generator, count: int, low: float, high: float, separation: float
) -> NDArray[np.float64]:
    """
    Poisson-disk dart throwing with a hex lattice fallback.

    :param rng: Generator.
    :param count: Stem count.
    :param low: Lowest allowed coordinate on both axes.
    :param high: Highest allowed coordinate on both axes.
    :param separation: Minimum distance between stems.
    :return: Bases (count, 2).
    :raises InputError: if count exceeds the hex packing capacity of the square.
    """
    if count == 0:
        return np.zeros((0, 2))
    lattice: NDArray[np.float64] = _hex_lattice(low=low, high=high, spacing=separation)
    if count > len(lattice):
        raise InputError(
            f"Cannot place {count} stems {separation:.2f} m apart in the footprint, at most {len(lattice)} fit"
        )
    points: list[NDArray[np.float64]] = []
    attempts: int = 0
    while len(points) < count and attempts < 200 * count:
        attempts += 1
        candidate: NDArray[np.float64] = rng.uniform(low, high, size=2)
        if not points or np.min(np.linalg.norm(np.array(points) - candidate, axis=1)) >= separation:
            points.append(candidate)
    if len(points) == count:
        return np.array(points)
    logger.debug(f"Dart throwing placed {len(points)} of {count} stems, using the hex lattice")
    return lattice[np.sort(rng.choice(len(lattice), size=count, replace=False))]


def generate_forest(params: ForestParams) -> AnalyticScene:
    """
    Builds a procedural forest: noisy terrain, Poisson-disk stems crowned by 3 to 8 blobs each,
    and flat targets on the ground.

    :param params: Forest parameters.
    :return: AnalyticScene, identical for identical parameters.
    :raises InputError: if the parameters are out of range or the stems do not fit.
    """
    if not params.extent > 0:
        raise InputError(f"extent must be positive, got {params.extent}")
    if params.n_stems < 0 or params.n_targets < 0:
        raise InputError("n_stems and n_targets must not be negative")
    if not 0.0 <= params.canopy_density <= 1.0:
        raise InputError(f"canopy_density must lie in [0, 1], got {params.canopy_density}")
    _check_range("blob_opacity_range", params.blob_opacity_range, 0.0, 1.0, open_low=True)
    if params.blob_opacity_range[1] >= 1.0:
        raise InputError(f"blob_opacity_range must stay below 1, got {params.blob_opacity_range}")
    _check_range("stem_radius_range", params.stem_radius_range, 0.0, params.extent, open_low=True)
    _check_range("stem_height_range", params.stem_height_range, 0.0, np.inf, open_low=True)

    rng: np.random.Generator = np.random.default_rng(params.seed)
    half: float = params.extent / 2.0
    dtm: Dtm = _terrain(rng=rng, extent=params.extent, relief=params.terrain_relief, cell=params.terrain_cell)
    r_max: float = float(params.stem_radius_range[1])
    bases: NDArray[np.float64] = _place_stems(
        rng=rng, count=params.n_stems, low=-half + 2.0 * r_max, high=half - 2.0 * r_max, separation=4.0 * r_max
    )

    stems: list[Stem] = []
    for base in bases:
        heights, _ = dtm_heights(dtm=dtm, xs=base[:1], ys=base[1:])
        stems.append(
            Stem(
                base=tuple(base),
                base_z=float(heights[0]),
                height=float(rng.uniform(*params.stem_height_range)),
                radius=float(rng.uniform(*params.stem_radius_range)),
                albedo=tuple(np.clip(np.array(params.stem_color) * (1.0 + 0.1 * rng.standard_normal(3)), 0.02, 0.98)),
            )
        )

    canopy: list[CanopyBlob] = []
    if params.canopy_density > 0 and stems:
        crown: float = float(np.sqrt(params.canopy_density * params.extent**2 / (len(stems) * np.pi)))
        for stem in stems:
            for _ in range(int(rng.integers(3, 9))):
                angle: float = float(rng.uniform(0.0, 2.0 * np.pi))
                reach: float = float(rng.uniform(0.0, 0.6)) * crown
                center: NDArray[np.float64] = np.array(
                    [
                        np.clip(stem.base[0] + reach * np.cos(angle), -half, half),
                        np.clip(stem.base[1] + reach * np.sin(angle), -half, half),
                        stem.top - float(rng.uniform(0.0, 0.25)) * stem.height,
                    ]
                )
                canopy.append(
                    CanopyBlob(
                        center=tuple(center),
                        radii=(
                            crown * float(rng.uniform(0.45, 0.7)),
                            crown * float(rng.uniform(0.45, 0.7)),
                            float(rng.uniform(0.8, 1.8)),
                        ),
                        albedo=tuple(
                            np.clip(np.array(params.canopy_color) * (1.0 + 0.15 * rng.standard_normal(3)), 0.02, 0.98)
                        ),
                        opacity=float(rng.uniform(*params.blob_opacity_range)),
                    )
                )

    targets: list[Target] = []
    side: float = params.target_size / 2.0
    for number in range(params.n_targets):
        center_xy: NDArray[np.float64] = rng.uniform(-half + side, half - side, size=2)
        for _ in range(100):
            if not len(bases) or np.min(np.linalg.norm(bases - center_xy, axis=1)) > side * 1.5 + r_max:
                break
            center_xy = rng.uniform(-half + side, half - side, size=2)
        targets.append(
            Target(
                center=tuple(center_xy),
                half_size=(side, side),
                albedo=_TARGET_PALETTE[number % len(_TARGET_PALETTE)],
            )
        )

    lattice: int = int(np.ceil(params.extent / params.texture_cell)) + 2
    texture: GroundTexture = GroundTexture(
        origin=(-half, -half),
        cell=params.texture_cell,
        values=rng.random((lattice, lattice)),
        color=params.ground_color,
    )
    sun: SunLight | None = None
    if params.sun_elevation_deg > 0:
        sun = SunLight(
            elevation_deg=params.sun_elevation_deg,
            azimuth_deg=params.sun_azimuth_deg,
            lit_gain=params.lit_gain,
            shadow_gain=params.shadow_gain,
        )
    logger.debug(f"Generated forest: {len(stems)} stems, {len(canopy)} blobs, {len(targets)} targets")
    return AnalyticScene(
        dtm=dtm,
        texture=texture,
        stems=tuple(stems),
        canopy=tuple(canopy),
        targets=tuple(targets),
        background=params.background,
        sun=sun,
    )


# endregion


# region Oracle
def _cylinder_hits(
    origins: NDArray[np.float64], directions: NDArray[np.float64], stem: Stem, z_bottom: float
) -> NDArray[np.float64]:
    """
    Returns the first hit of every ray with a stem (side or top cap), inf on a miss.

    :param origins: Ray origins (N, 3).
    :param directions: Ray directions (N, 3).
    :param stem: Stem.
    :param z_bottom: Lower end of the cylinder, below the terrain.
    :return: Hit distances (N,).
    """
    base: NDArray[np.float64] = np.array(stem.base)
    offset: NDArray[np.float64] = origins[:, :2] - base
    dxy: NDArray[np.float64] = directions[:, :2]
    a: NDArray[np.float64] = np.sum(dxy * dxy, axis=1)
    b: NDArray[np.float64] = 2.0 * np.sum(offset * dxy, axis=1)
    c: NDArray[np.float64] = np.sum(offset * offset, axis=1) - stem.radius**2
    disc: NDArray[np.float64] = b * b - 4.0 * a * c
    result: NDArray[np.float64] = np.full(len(origins), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        root: NDArray[np.float64] = np.sqrt(np.maximum(disc, 0.0))
        for t in ((-b - root) / (2.0 * a), (-b + root) / (2.0 * a)):
            z: NDArray[np.float64] = origins[:, 2] + t * directions[:, 2]
            ok: NDArray[np.bool_] = (a > 0) & (disc >= 0) & (t > _EPS) & (z >= z_bottom) & (z <= stem.top)
            result = np.where(ok & (t < result), t, result)
        t_cap: NDArray[np.float64] = (stem.top - origins[:, 2]) / directions[:, 2]
        cap: NDArray[np.float64] = origins[:, :2] + t_cap[:, None] * dxy - base
        ok = (directions[:, 2] != 0) & (t_cap > _EPS) & (np.sum(cap * cap, axis=1) <= stem.radius**2)
    return np.where(ok & (t_cap < result), t_cap, result)


def _ellipsoid_hits(
    origins: NDArray[np.float64], directions: NDArray[np.float64], blob: CanopyBlob
) -> NDArray[np.float64]:
    """
    Returns where every ray enters a blob, 0 for rays starting inside, inf on a miss.

    :param origins: Ray origins (N, 3).
    :param directions: Ray directions (N, 3).
    :param blob: Blob.
    :return: Entry distances (N,).
    """
    radii: NDArray[np.float64] = np.array(blob.radii)
    o: NDArray[np.float64] = (origins - np.array(blob.center)) / radii
    d: NDArray[np.float64] = directions / radii
    a: NDArray[np.float64] = np.sum(d * d, axis=1)
    b: NDArray[np.float64] = 2.0 * np.sum(o * d, axis=1)
    c: NDArray[np.float64] = np.sum(o * o, axis=1) - 1.0
    disc: NDArray[np.float64] = b * b - 4.0 * a * c
    root: NDArray[np.float64] = np.sqrt(np.maximum(disc, 0.0))
    t0: NDArray[np.float64] = (-b - root) / (2.0 * a)
    t1: NDArray[np.float64] = (-b + root) / (2.0 * a)
    entry: NDArray[np.float64] = np.where(t0 > _EPS, t0, 0.0)
    return np.where((disc >= 0) & (t1 > _EPS), entry, np.inf)


def _ground_hits(
    scene: AnalyticScene, origins: NDArray[np.float64], directions: NDArray[np.float64]
) -> NDArray[np.float64]:
    count: int = len(origins)
    rays: RayBundle = RayBundle(
        origins=origins, directions=directions, t_near=np.zeros(count), t_far=np.full(count, _FAR)
    )
    t: NDArray[np.float64] = ground_entries(rays=rays, dtm=scene.dtm, margin=0.0)
    return np.where(t < _FAR, t, np.inf)


def _sun_factor(scene: AnalyticScene, points: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Returns the radiance gain of ground points; shadows come from all geometry whatever layers are drawn.

    :param scene: Scene.
    :param points: Ground points (N, 3).
    :return: Gains (N,).
    """
    if scene.sun is None:
        return np.ones(len(points))
    start: NDArray[np.float64] = points + np.array([0.0, 0.0, 1e-4])
    toward: NDArray[np.float64] = np.broadcast_to(scene.sun.direction, points.shape)
    light: NDArray[np.float64] = np.ones(len(points))
    z_bottom: float = float(scene.dtm.heights.min()) - 1.0
    for stem in scene.stems:
        light[np.isfinite(_cylinder_hits(start, toward, stem, z_bottom))] = 0.0
    for blob in scene.canopy:
        light *= np.where(np.isfinite(_ellipsoid_hits(start, toward, blob)), 1.0 - blob.opacity, 1.0)
    return scene.sun.shadow_gain + (scene.sun.lit_gain - scene.sun.shadow_gain) * light


def _ground_radiance(
    scene: AnalyticScene, points: NDArray[np.float64], targets: bool
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    color, on_target = scene.ground_color(xs=points[:, 0], ys=points[:, 1], targets=targets)
    return np.clip(color * _sun_factor(scene=scene, points=points)[:, None], 0.0, 1.0), on_target


def _oracle_rays(
    scene: AnalyticScene, origins: NDArray[np.float64], directions: NDArray[np.float64], layers: Layers
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    count: int = len(origins)
    t_ground: NDArray[np.float64] = (
        _ground_hits(scene=scene, origins=origins, directions=directions) if layers.terrain else np.full(count, np.inf)
    )
    t_stem: NDArray[np.float64] = np.full(count, np.inf)
    stem_color: NDArray[np.float64] = np.zeros((count, 3))
    if layers.stems:
        z_bottom: float = float(scene.dtm.heights.min()) - 1.0
        for stem in scene.stems:
            t: NDArray[np.float64] = _cylinder_hits(origins, directions, stem, z_bottom)
            closer: NDArray[np.bool_] = t < t_stem
            t_stem = np.where(closer, t, t_stem)
            stem_color[closer] = stem.albedo
    t_opaque: NDArray[np.float64] = np.minimum(t_ground, t_stem)
    opaque: NDArray[np.float64] = np.tile(np.array(scene.background), (count, 1))
    target: NDArray[np.float64] = np.zeros(count)
    on_ground: NDArray[np.bool_] = np.isfinite(t_ground) & (t_ground <= t_stem)
    if np.any(on_ground):
        points: NDArray[np.float64] = origins[on_ground] + t_ground[on_ground, None] * directions[on_ground]
        radiance, on_target = _ground_radiance(scene=scene, points=points, targets=layers.targets)
        opaque[on_ground] = radiance
        target[on_ground] = on_target
    on_stem: NDArray[np.bool_] = np.isfinite(t_stem) & (t_stem < t_ground)
    opaque[on_stem] = stem_color[on_stem]

    segmentation: NDArray[np.float64] = np.ones(count)
    if not (layers.canopy and scene.canopy):
        return opaque, segmentation, target
    t_blob: NDArray[np.float64] = np.stack([_ellipsoid_hits(origins, directions, blob) for blob in scene.canopy])
    t_blob = np.where(t_blob < t_opaque[None, :], t_blob, np.inf)
    order: NDArray[np.int64] = np.argsort(t_blob, axis=0, kind="stable")
    hit: NDArray[np.bool_] = np.isfinite(np.take_along_axis(t_blob, order, axis=0))
    alpha: NDArray[np.float64] = np.where(hit, np.array([blob.opacity for blob in scene.canopy])[order], 0.0)
    albedo: NDArray[np.float64] = np.array([blob.albedo for blob in scene.canopy])[order]
    survive: NDArray[np.float64] = np.cumprod(1.0 - alpha, axis=0)
    front: NDArray[np.float64] = np.concatenate([np.ones((1, count)), survive[:-1]], axis=0)
    color: NDArray[np.float64] = np.sum((front * alpha)[..., None] * albedo, axis=0) + survive[-1][:, None] * opaque
    segmentation[hit[0]] = 0.0
    return color, segmentation, target


def oracle_render_layers(
    scene: AnalyticScene, camera: Camera, layers: Layers = Layers(), threads: int = 1
) -> OracleRender:
    """
    Renders a camera in closed form, returning the segmentation and target masks with the image.

    :param scene: Scene.
    :param camera: Camera above the terrain.
    :param layers: Parts to draw.
    :param threads: Worker count.
    :return: OracleRender.
    """
    rays: RayBundle = camera_rays(camera=camera)

    def chunk(lo: int, hi: int) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        return _oracle_rays(scene=scene, origins=rays.origins[lo:hi], directions=rays.directions[lo:hi], layers=layers)

    parts: list[tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]] = run_chunks(
        func=chunk, total=len(rays), chunk_size=_CHUNK, threads=threads
    )
    shape: tuple[int, int] = (camera.height, camera.width)
    return OracleRender(
        image=np.concatenate([p[0] for p in parts]).reshape(*shape, 3),
        segmentation=np.concatenate([p[1] for p in parts]).reshape(shape),
        target_mask=np.concatenate([p[2] for p in parts]).reshape(shape),
    )


def oracle_render(
    scene: AnalyticScene, camera: Camera, layers: Layers = Layers(), threads: int = 1
) -> NDArray[np.float64]:
    """
    Renders a camera in closed form. Without the canopy layer this is the exact canopy-free ground truth.

    :param scene: Scene.
    :param camera: Camera above the terrain.
    :param layers: Parts to draw.
    :param threads: Worker count.
    :return: Linear image (H, W, 3).
    """
    return oracle_render_layers(scene=scene, camera=camera, layers=layers, threads=threads).image


# endregion


# region Capture
def _check_capture(scene: AnalyticScene, cfg: CaptureConfig) -> None:
    if cfg.n_x < 1 or cfg.n_y < 1:
        raise InputError(f"Capture grid must be at least 1x1, got {cfg.n_x}x{cfg.n_y}")
    if not cfg.gsd_target > 0:
        raise InputError(f"gsd_target must be positive, got {cfg.gsd_target}")
    if cfg.width < 1 or cfg.height < 1:
        raise InputError(f"Image size must be positive, got {cfg.width}x{cfg.height}")
    if cfg.exposure_gain < 0 or cfg.noise_sigma < 0:
        raise InputError("exposure_gain and noise_sigma must not be negative")
    if cfg.holdout_views < 0:
        raise InputError(f"holdout_views must not be negative, got {cfg.holdout_views}")
    if not cfg.altitude > scene.top:
        raise InputError(f"Altitude {cfg.altitude} m must be above the scene top at {scene.top:.2f} m")


def capture_cameras(
    scene: AnalyticScene, cfg: CaptureConfig, offset: tuple[float, float] = (0.0, 0.0)
) -> list[Camera]:
    """
    Returns the capture grid centered on the footprint, row by row.

    The focal length is derived from gsd_target over the mean terrain height when fx is not set.
    Tilted cameras lean their optical axis toward the scene center.

    :param scene: Scene.
    :param cfg: Capture configuration.
    :param offset: Shift of the whole grid in meters.
    :return: Cameras.
    """
    x0, y0, x1, y1 = scene.dtm.footprint
    center: NDArray[np.float64] = np.array([(x0 + x1) / 2.0, (y0 + y1) / 2.0])
    fx: float = cfg.fx if cfg.fx is not None else (cfg.altitude - float(scene.dtm.heights.mean())) / cfg.gsd_target
    fy: float = cfg.fy if cfg.fy is not None else fx
    row_spacing: float = cfg.spacing if cfg.spacing_y is None else cfg.spacing_y
    tilt: float = np.deg2rad(cfg.tilt_deg)
    cameras: list[Camera] = []
    for j in range(cfg.n_y):
        for i in range(cfg.n_x):
            eye: NDArray[np.float64] = np.array(
                [
                    center[0] + (i - (cfg.n_x - 1) / 2.0) * cfg.spacing + offset[0],
                    center[1] + (j - (cfg.n_y - 1) / 2.0) * row_spacing + offset[1],
                    cfg.altitude,
                ]
            )
            toward: NDArray[np.float64] = center - eye[:2]
            axis: NDArray[np.float64] = np.array([0.0, 0.0, -1.0])
            if tilt != 0.0 and np.linalg.norm(toward) > 1e-9:
                toward /= np.linalg.norm(toward)
                axis = np.array([np.sin(tilt) * toward[0], np.sin(tilt) * toward[1], -np.cos(tilt)])
            cameras.append(
                Camera(
                    fx=fx,
                    fy=fy,
                    cx=cfg.width / 2.0,
                    cy=cfg.height / 2.0,
                    width=cfg.width,
                    height=cfg.height,
                    rotation=look_at_rotation(eye=eye, target=eye + axis),
                    translation=eye,
                )
            )
    return cameras


def _expose(image: NDArray[np.float64], cfg: CaptureConfig, rng: np.random.Generator | None) -> NDArray[np.float64]:
    exposed: NDArray[np.float64] = image * cfg.exposure_gain
    if rng is not None and cfg.noise_sigma > 0:
        exposed = exposed + rng.normal(0.0, cfg.noise_sigma, size=image.shape)
    return np.clip(exposed, 0.0, 1.0)


def _render_views(
    scene: AnalyticScene, cameras: list[Camera], cfg: CaptureConfig, rng: np.random.Generator | None, threads: int
) -> Views:
    images: list[NDArray[np.float64]] = []
    segmentation: list[NDArray[np.float64]] = []
    ground: list[NDArray[np.float64]] = []
    targets: list[NDArray[np.float64]] = []
    for camera in cameras:
        full: OracleRender = oracle_render_layers(scene=scene, camera=camera, threads=threads)
        bare: OracleRender = oracle_render_layers(
            scene=scene, camera=camera, layers=Layers(canopy=False), threads=threads
        )
        images.append(_expose(image=full.image, cfg=cfg, rng=rng))
        segmentation.append(full.segmentation)
        ground.append(_expose(image=bare.image, cfg=cfg, rng=None))
        targets.append(bare.target_mask)
    return Views(cameras=cameras, images=images, segmentation=segmentation, ground=ground, targets=targets)


def generate_capture(scene: AnalyticScene, cfg: CaptureConfig, threads: int = 1) -> Dataset:
    """
    Renders the capture grid with every layer on, applies the exposure gain, then the noise, then clamps.

    Every view also gets its segmentation map, the canopy-free oracle image (gain applied, no noise)
    and the target mask. Held-out cameras sit half a spacing off the grid and are rendered noise-free.

    :param scene: Scene.
    :param cfg: Capture configuration.
    :param threads: Worker count.
    :return: Dataset.
    :raises InputError: if the configuration is invalid.
    """
    _check_capture(scene=scene, cfg=cfg)
    rng: np.random.Generator = np.random.default_rng(cfg.seed)
    cameras: list[Camera] = capture_cameras(scene=scene, cfg=cfg)
    train: Views = _render_views(scene=scene, cameras=cameras, cfg=cfg, rng=rng, threads=threads)
    heldout: Views | None = None
    if cfg.holdout_views > 0:
        row_spacing: float = cfg.spacing if cfg.spacing_y is None else cfg.spacing_y
        candidates: list[Camera] = capture_cameras(scene=scene, cfg=cfg, offset=(cfg.spacing / 2.0, row_spacing / 2.0))
        picked: NDArray[np.int64] = np.sort(
            np.random.default_rng([cfg.seed, 1]).permutation(len(candidates))[: cfg.holdout_views]
        )
        heldout = _render_views(
            scene=scene, cameras=[candidates[i] for i in picked], cfg=cfg, rng=None, threads=threads
        )
    fx: float = cameras[0].fx
    gsd: float = (cfg.altitude - float(scene.dtm.heights.mean())) / fx
    held: int = 0 if heldout is None else len(heldout)
    logger.info(f"Captured {len(cameras)} views at {gsd:.3f} m/pixel, {held} held out")
    return Dataset(train=train, dtm=scene.dtm, scene=scene, heldout=heldout, metadata={"fx": fx, "gsd": gsd})


# endregion


# region Field conversion
def scene_to_field(
    scene: AnalyticScene,
    config: FieldConfig,
    supersample: int = 2,
    solid_sigma: float = 60.0,
    layers: Layers = Layers(),
) -> VoxelField:
    """
    Converts the scene to an equivalent voxel field by supersampled occupancy.

    Terrain and stems become dense solid; a blob of opacity alpha gets the density that gives alpha
    across its vertical diameter. Voxel colors are density-weighted albedos, empty voxels take the
    ground radiance of their column; visibility is 0 where canopy dominates the density.

    :param scene: Scene.
    :param config: Field layout, bounds are derived from the terrain when empty.
    :param supersample: Occupancy samples per voxel and axis.
    :param solid_sigma: Density of terrain and stems in 1/m.
    :param layers: Parts to convert.
    :return: VoxelField.
    :raises InputError: if supersample is below 1.
    """
    if supersample < 1:
        raise InputError(f"supersample must be at least 1, got {supersample}")
    lower, upper = field_bounds(config=config, dtm=scene.dtm)
    field: VoxelField = field_new(lower=lower, upper=upper, resolution=tuple(int(n) for n in config.resolution))
    nx, ny, nz = field.resolution
    size: NDArray[np.float64] = field.voxel_size
    sub: NDArray[np.float64] = (np.arange(supersample) + 0.5) / supersample - 0.5
    oy, oz, ox = np.meshgrid(sub * size[1], sub * size[2], sub * size[0], indexing="ij")
    offsets: NDArray[np.float64] = np.stack([ox.ravel(), oy.ravel(), oz.ravel()], axis=1)
    ys: NDArray[np.float64] = lower[1] + (np.arange(ny) + 0.5) * size[1]
    zs: NDArray[np.float64] = lower[2] + (np.arange(nz) + 0.5) * size[2]
    z_bottom: float = float(scene.dtm.heights.min()) - 1.0
    blob_sigma: list[float] = [-np.log1p(-blob.opacity) / (2.0 * blob.radii[2]) for blob in scene.canopy]

    for ix in range(nx):
        x: float = float(lower[0] + (ix + 0.5) * size[0])
        gy, gz = np.meshgrid(ys, zs, indexing="ij")
        centers: NDArray[np.float64] = np.stack([np.full(gy.size, x), gy.ravel(), gz.ravel()], axis=1)
        samples: NDArray[np.float64] = (centers[:, None, :] + offsets[None, :, :]).reshape(-1, 3)
        per_voxel: int = offsets.shape[0]

        column: NDArray[np.float64] = np.stack([np.full(ny, x), ys, np.zeros(ny)], axis=1)
        column[:, 2], _ = dtm_heights(dtm=scene.dtm, xs=column[:, 0], ys=column[:, 1])
        column_color, _ = _ground_radiance(scene=scene, points=column, targets=layers.targets)
        ground_color: NDArray[np.float64] = np.repeat(column_color, nz, axis=0)

        weight_sum: NDArray[np.float64] = np.zeros(len(centers))
        color_sum: NDArray[np.float64] = np.zeros((len(centers), 3))
        canopy_sum: NDArray[np.float64] = np.zeros(len(centers))
        if layers.terrain:
            surface, _ = dtm_heights(dtm=scene.dtm, xs=samples[:, 0], ys=samples[:, 1])
            share: NDArray[np.float64] = (samples[:, 2] < surface).reshape(-1, per_voxel).mean(axis=1) * solid_sigma
            weight_sum += share
            color_sum += share[:, None] * ground_color
        if layers.stems:
            for stem in scene.stems:
                inside: NDArray[np.bool_] = (
                    ((samples[:, 0] - stem.base[0]) ** 2 + (samples[:, 1] - stem.base[1]) ** 2 <= stem.radius**2)
                    & (samples[:, 2] <= stem.top)
                    & (samples[:, 2] >= z_bottom)
                )
                share = inside.reshape(-1, per_voxel).mean(axis=1) * solid_sigma
                weight_sum += share
                color_sum += share[:, None] * np.array(stem.albedo)
        if layers.canopy:
            for blob, sigma in zip(scene.canopy, blob_sigma):
                inside = np.sum(((samples - np.array(blob.center)) / np.array(blob.radii)) ** 2, axis=1) <= 1.0
                share = inside.reshape(-1, per_voxel).mean(axis=1) * sigma
                weight_sum += share
                color_sum += share[:, None] * np.array(blob.albedo)
                canopy_sum += share

        filled: NDArray[np.bool_] = weight_sum > 0
        color: NDArray[np.float64] = ground_color.copy()
        color[filled] = color_sum[filled] / weight_sum[filled, None]
        canopy_share: NDArray[np.float64] = np.where(filled, canopy_sum / np.where(filled, weight_sum, 1.0), 0.0)
        slab: NDArray[np.float64] = field.params[ix].reshape(-1, 5)
        slab[:, 0] = inverse_softplus(np.maximum(weight_sum, 1e-6))
        slab[:, 1:4] = inverse_sigmoid(color)
        slab[:, 4] = inverse_sigmoid(1.0 - canopy_share)
    logger.debug(f"Converted scene to a {nx}x{ny}x{nz} field")
    return field


# endregion
