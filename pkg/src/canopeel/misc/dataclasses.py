"""Module for working with configuration records and run metadata."""

from pathlib import Path
from typing import Any, NamedTuple

__all__: tuple[str, ...] = (
    "CaptureConfig",
    "FieldConfig",
    "ForestParams",
    "Paths",
    "RunManifest",
    "StemsConfig",
    "TrainConfig",
)


# region Application
class Paths(NamedTuple):
    """
    A class to represent paths to folders used in the program.

    :param logs: Folder for the log file.
    :param tmpl: Folder containing Jinja2 report templates.
    """

    logs: Path
    tmpl: Path


class RunManifest(NamedTuple):
    """
    A class to represent the record written at the end of every command.

    :param command: Subcommand name.
    :param seed: Seed all randomness of the run flows from.
    :param config: Snapshot of every config record used, inlined.
    :param artifacts: Artifact name to path mapping.
    :param version: Tool version.
    :param phases: Wall time in seconds per phase.
    """

    command: str
    seed: int
    config: dict[str, Any]
    artifacts: dict[str, str]
    version: str
    phases: dict[str, float]


# endregion


# region Experiment configs
class ForestParams(NamedTuple):
    """
    A class to represent the parameters of the procedural forest.

    :param seed: Seed of the scene generator.
    :param extent: Side of the square terrain footprint in meters.
    :param n_stems: Number of trees.
    :param canopy_density: Target fraction of the footprint covered by crowns, 0 disables the canopy.
    :param blob_opacity_range: Range the opacity of every canopy blob is drawn from.
    :param stem_radius_range: Range of stem radii in meters.
    :param stem_height_range: Range of stem heights in meters.
    :param terrain_relief: Amplitude of the terrain height noise in meters.
    :param terrain_cell: Cell size of the terrain raster in meters.
    :param texture_cell: Cell size of the ground albedo noise lattice in meters.
    :param n_targets: Number of flat colored rectangles on the ground.
    :param target_size: Side of the target rectangles in meters.
    :param ground_color: Mean ground albedo, linear RGB.
    :param stem_color: Stem albedo, linear RGB.
    :param canopy_color: Mean canopy albedo, linear RGB.
    :param background: Background color, linear RGB.
    :param sun_elevation_deg: Elevation of the direct light, 0 means diffuse lighting only.
    :param sun_azimuth_deg: Azimuth of the direct light, counterclockwise from +x.
    :param lit_gain: Radiance gain of sunlit ground.
    :param shadow_gain: Radiance gain of ground in cast shadow.
    """

    seed: int = 0
    extent: float = 30.0
    n_stems: int = 12
    canopy_density: float = 0.55
    blob_opacity_range: tuple[float, ...] = (0.55, 0.9)
    stem_radius_range: tuple[float, ...] = (0.15, 0.3)
    stem_height_range: tuple[float, ...] = (8.0, 13.0)
    terrain_relief: float = 1.0
    terrain_cell: float = 0.5
    texture_cell: float = 1.5
    n_targets: int = 4
    target_size: float = 1.5
    ground_color: tuple[float, ...] = (0.42, 0.33, 0.22)
    stem_color: tuple[float, ...] = (0.30, 0.28, 0.26)
    canopy_color: tuple[float, ...] = (0.14, 0.40, 0.10)
    background: tuple[float, ...] = (0.5, 0.5, 0.5)
    sun_elevation_deg: float = 0.0
    sun_azimuth_deg: float = 135.0
    lit_gain: float = 1.6
    shadow_gain: float = 0.15


class CaptureConfig(NamedTuple):
    """
    A class to represent an image capture flight over the synthetic forest.

    :param n_x: Number of camera positions along x.
    :param n_y: Number of camera positions along y.
    :param spacing: Distance between neighbouring camera positions in meters.
    :param spacing_y: Distance between camera rows in meters, equal to spacing when None.
    :param altitude: Camera altitude (world z) in meters.
    :param width: Image width in pixels.
    :param height: Image height in pixels.
    :param fx: Horizontal focal length in pixels, derived from gsd_target when None.
    :param fy: Vertical focal length in pixels, equal to fx when None.
    :param gsd_target: Ground sample distance in meters per pixel used to derive the focal length.
    :param exposure_gain: Linear gain applied to every rendered image.
    :param noise_sigma: Standard deviation of the additive Gaussian noise, linear RGB.
    :param tilt_deg: Tilt of every camera toward the scene center, 0 means nadir.
    :param holdout_views: Number of held-out cameras rendered for evaluation.
    :param seed: Seed of the noise generator.
    """

    n_x: int = 6
    n_y: int = 6
    spacing: float = 3.0
    spacing_y: float | None = None
    altitude: float = 35.0
    width: int = 96
    height: int = 96
    fx: float | None = None
    fy: float | None = None
    gsd_target: float = 0.3
    exposure_gain: float = 1.0
    noise_sigma: float = 0.0
    tilt_deg: float = 0.0
    holdout_views: int = 8
    seed: int = 0


class FieldConfig(NamedTuple):
    """
    A class to represent the layout and initialization of a voxel field.

    :param resolution: Voxel count along x, y and z.
    :param bounds: Explicit box (x0, y0, z0, x1, y1, z1), derived from the terrain when empty.
    :param height_above_ground: Box height above the lowest terrain point when bounds are derived.
    :param sigma_raw_init: Initial raw density.
    :param color_raw_init: Initial raw color.
    :param v_raw_init: Initial raw visibility.
    """

    resolution: tuple[int, ...] = (64, 64, 64)
    bounds: tuple[float, ...] = ()
    height_above_ground: float = 18.0
    sigma_raw_init: float = -2.0
    color_raw_init: float = 0.0
    v_raw_init: float = 10.0


class TrainConfig(NamedTuple):
    """
    A class to represent the optimization settings.

    :param loss_kind: One of "l1", "raw" or "l1+raw".
    :param raw_weight: Weight of the low-light term in the combined loss.
    :param epsilon: Tolerance of the low-light loss denominator.
    :param n_samples: Samples per ray.
    :param batch_size: Rays per step.
    :param step_count: Number of optimization steps.
    :param learning_rate: Adam step size.
    :param beta1: Adam first moment decay.
    :param beta2: Adam second moment decay.
    :param adam_eps: Adam denominator tolerance.
    :param visibility_loss_weight: Weight of the visibility cross-entropy.
    :param background: Background color composited behind every training ray.
    :param checkpoint_every: Steps between checkpoints, 0 disables periodic checkpoints.
    :param log_every: Steps between log lines.
    :param rng_seed: Seed of batch sampling and jitter.
    """

    loss_kind: str = "l1"
    raw_weight: float = 1.0
    epsilon: float = 1e-3
    n_samples: int = 64
    batch_size: int = 8192
    step_count: int = 5000
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.99
    adam_eps: float = 1e-8
    visibility_loss_weight: float = 0.1
    background: tuple[float, ...] = (0.0, 0.0, 0.0)
    checkpoint_every: int = 1000
    log_every: int = 100
    rng_seed: int = 0


class StemsConfig(NamedTuple):
    """
    A class to represent the stem counting pipeline settings.

    :param sigma_threshold: Minimum density of an exported point.
    :param stride: Export grid step in voxels.
    :param oversample: Export grid subdivisions per step.
    :param foliage_rgb: Linear RGB of the foliage seed color.
    :param hsv_half_widths: Half-widths of the HSV box around the seed color.
    :param z_low_offset: Lower crop offset above the terrain in meters.
    :param z_high_offset: Upper crop offset above the terrain in meters.
    :param min_cluster_size: Smallest HDBSCAN cluster.
    :param min_samples: Neighbour count of the HDBSCAN core distance.
    :param min_volume: Smallest accepted cluster bounding volume in cubic meters.
    :param max_volume: Largest accepted cluster bounding volume in cubic meters.
    :param max_tilt_deg: Largest accepted angle between a cluster axis and the vertical.
    :param merge_xy_radius: Largest horizontal centroid distance of vertically stacked clusters to merge.
    """

    sigma_threshold: float = 5.0
    stride: int = 1
    oversample: int = 1
    foliage_rgb: tuple[float, ...] = (0.14, 0.40, 0.10)
    hsv_half_widths: tuple[float, ...] = (0.08, 0.35, 0.45)
    z_low_offset: float = 0.3
    z_high_offset: float = 8.0
    min_cluster_size: int = 8
    min_samples: int = 4
    min_volume: float = 0.01
    max_volume: float = 5.0
    max_tilt_deg: float = 25.0
    merge_xy_radius: float = 0.5


# endregion
