"""
Stem counting on point clouds exported from the density field.

The pipeline removes foliage by color, crops the cloud between two heights above the
terrain, clusters the remaining points and keeps the near-vertical clusters of plausible
size, merging clusters stacked on top of each other.
"""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from canopeel.config import logger
from canopeel.misc.dataclasses import StemsConfig
from canopeel.misc.exceptions import InputError, StorageError
from canopeel.services.analysis.hdbscan import NOISE, hdbscan_cluster
from canopeel.services.analysis.pointcloud import PointCloud
from canopeel.services.analysis.segmentation import HsvBox, in_hsv_box, to_hsv
from canopeel.services.field import VoxelField, export_points
from canopeel.services.geometry import Dtm, dtm_heights

__all__: tuple[str, ...] = (
    "DISCARD_REASONS",
    "STAGE_FILES",
    "StemCluster",
    "StemReport",
    "crop_points",
    "principal_axis",
    "remove_foliage_points",
    "run_stem_pipeline",
    "stem_filter_and_merge",
)

DISCARD_REASONS: tuple[str, ...] = ("degenerate", "too_small", "too_large", "tilted")
STAGE_FILES: tuple[str, ...] = ("stage_1_dense.ply", "stage_2_filtered.ply", "stage_3_stems.ply")


# region Point filters
def remove_foliage_points(cloud: PointCloud, box: HsvBox) -> PointCloud:
    """
    Drops the points whose color falls in the HSV box, the order of the rest is kept.

    :param cloud: Colored cloud.
    :param box: Box around the foliage color.
    :return: PointCloud.
    """
    if len(cloud) == 0:
        return cloud
    return cloud.select(~in_hsv_box(hsv=to_hsv(cloud.colors), box=box))


def crop_points(cloud: PointCloud, dtm: Dtm, z_low_offset: float, z_high_offset: float) -> PointCloud:
    """
    Keeps the points between two heights above the terrain at their own (x, y).

    :param cloud: Cloud.
    :param dtm: Terrain model.
    :param z_low_offset: Lower bound above the terrain, inclusive.
    :param z_high_offset: Upper bound above the terrain, inclusive.
    :return: PointCloud.
    :raises InputError: if z_low_offset >= z_high_offset.
    """
    if not z_low_offset < z_high_offset:
        raise InputError(f"Crop offsets must satisfy low < high, got {z_low_offset} and {z_high_offset}")
    if len(cloud) == 0:
        return cloud
    ground, _ = dtm_heights(dtm=dtm, xs=cloud.positions[:, 0], ys=cloud.positions[:, 1])
    z: NDArray[np.float64] = cloud.positions[:, 2]
    return cloud.select((z >= ground + z_low_offset) & (z <= ground + z_high_offset))


# endregion


# region Clusters
@dataclass(frozen=True, eq=False)
class StemCluster:
    """
    A retained stem.

    :param indices: Indices of its points in the clustered cloud, ascending.
    :param centroid: Mean position.
    :param axis: Principal axis, unit vector with z >= 0.
    :param tilt_deg: Angle between the axis and the vertical, in [0, 90].
    :param height: Vertical extent in meters.
    :param volume: Axis-aligned bounding volume in cubic meters.
    """

    indices: NDArray[np.int64]
    centroid: NDArray[np.float64]
    axis: NDArray[np.float64]
    tilt_deg: float
    height: float
    volume: float

    def to_dict(self) -> dict[str, Any]:
        """
        Returns the JSON record of the stem.

        :return: Dictionary.
        """
        return {
            "centroid": [float(c) for c in self.centroid],
            "tilt_deg": self.tilt_deg,
            "height_m": self.height,
            "n_points": int(len(self.indices)),
        }


@dataclass(eq=False)
class StemReport:
    """
    Result of the stem pipeline.

    :param stems: Retained stems.
    :param discarded: Count of discarded clusters per reason.
    """

    stems: list[StemCluster] = field(default_factory=list)
    discarded: dict[str, int] = field(default_factory=lambda: {reason: 0 for reason in DISCARD_REASONS})

    @property
    def stem_count(self) -> int:
        """
        Returns the number of stems.

        :return: Count.
        """
        return len(self.stems)

    def to_dict(self) -> dict[str, Any]:
        """
        Returns the JSON record of the report.

        :return: Dictionary.
        """
        return {
            "stem_count": self.stem_count,
            "stems": [stem.to_dict() for stem in self.stems],
            "discarded": dict(self.discarded),
        }

    def save(self, path: Path) -> None:
        """
        Writes the JSON report atomically.

        :param path: Output file.
        :raises StorageError: if the file cannot be written.
        """
        target: Path = Path(path)
        tmp: Path = target.with_name(target.name + ".tmp")
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            tmp.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
            os.replace(tmp, target)
        except OSError as exc:
            raise StorageError(f"Cannot write stem report {target}: {exc}") from exc


def principal_axis(points: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64], float]:
    """
    PCA of a point set.

    :param points: Points of shape (N, 3), N >= 2.
    :return: Centroid, unit principal axis with z >= 0 and its tilt from the vertical in degrees.
    """
    data: NDArray[np.float64] = np.asarray(points, dtype=np.float64)
    centroid: NDArray[np.float64] = data.mean(axis=0)
    centered: NDArray[np.float64] = data - centroid
    _, vectors = np.linalg.eigh(centered.T @ centered / len(data))
    axis: NDArray[np.float64] = vectors[:, -1]
    if axis[2] < 0:
        axis = -axis
    tilt: float = float(np.degrees(np.arccos(np.clip(abs(axis[2]), 0.0, 1.0))))
    return centroid, axis, tilt


def _describe(points: NDArray[np.float64], indices: NDArray[np.int64], spacing: float) -> StemCluster:
    members: NDArray[np.float64] = points[indices]
    centroid, axis, tilt = principal_axis(members)
    extent: NDArray[np.float64] = np.ptp(members, axis=0)
    return StemCluster(
        indices=indices,
        centroid=centroid,
        axis=axis,
        tilt_deg=tilt,
        height=float(extent[2]),
        volume=float(np.prod(extent + spacing)),
    )


def _discard_reason(points: NDArray[np.float64], stem: StemCluster | None, config: StemsConfig) -> str | None:
    if stem is None or not np.any(np.ptp(points, axis=0) > 0):
        return "degenerate"
    if stem.volume < config.min_volume:
        return "too_small"
    if stem.volume > config.max_volume:
        return "too_large"
    if stem.tilt_deg > config.max_tilt_deg:
        return "tilted"
    return None


def _overlaps(a: StemCluster, b: StemCluster, points: NDArray[np.float64]) -> bool:
    za: NDArray[np.float64] = points[a.indices, 2]
    zb: NDArray[np.float64] = points[b.indices, 2]
    return not (za.max() < zb.min() or zb.max() < za.min())


def stem_filter_and_merge(
    points: NDArray[np.float64], labels: NDArray[np.int64], config: StemsConfig, point_spacing: float = 0.0
) -> StemReport:
    """
    Filters the clusters by size and tilt, then merges surviving clusters stacked on top of each other.

    Two clusters merge when their centroids are at most merge_xy_radius apart in (x, y)
    and their z ranges are disjoint; merging is transitive. Merged stems are described
    again from the union of their points.

    :param points: Clustered points of shape (N, 3).
    :param labels: Cluster label per point, -1 for noise.
    :param config: Filter settings.
    :param point_spacing: Sampling step of the cloud, added to every bounding box side.
    :return: StemReport, stems ordered by their lowest cluster label.
    :raises InputError: if points and labels differ in length.
    """
    data: NDArray[np.float64] = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    tags: NDArray[np.int64] = np.asarray(labels, dtype=np.int64)
    if len(data) != len(tags):
        raise InputError(f"{len(data)} points but {len(tags)} labels")
    report: StemReport = StemReport()
    survivors: list[StemCluster] = []
    for label in np.unique(tags[tags != NOISE]):
        indices: NDArray[np.int64] = np.flatnonzero(tags == label)
        members: NDArray[np.float64] = data[indices]
        stem: StemCluster | None = _describe(data, indices, point_spacing) if len(indices) >= 2 else None
        reason: str | None = _discard_reason(points=members, stem=stem, config=config)
        if reason is None and stem is not None:
            survivors.append(stem)
        elif reason is not None:
            report.discarded[reason] += 1
    # Union-find over the survivors, the lower index stays the root.
    root: list[int] = list(range(len(survivors)))

    def find(i: int) -> int:
        while root[i] != i:
            root[i] = root[root[i]]
            i = root[i]
        return i

    for i, a in enumerate(survivors):
        for j in range(i + 1, len(survivors)):
            b: StemCluster = survivors[j]
            close: bool = float(np.hypot(*(a.centroid[:2] - b.centroid[:2]))) <= config.merge_xy_radius
            if close and not _overlaps(a, b, data):
                ri, rj = find(i), find(j)
                root[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(len(survivors)):
        groups.setdefault(find(i), []).append(i)
    for first in sorted(groups):
        members_of: list[int] = groups[first]
        if len(members_of) == 1:
            report.stems.append(survivors[first])
            continue
        merged: NDArray[np.int64] = np.sort(np.concatenate([survivors[i].indices for i in members_of]))
        report.stems.append(_describe(data, merged, point_spacing))
    logger.debug(f"Stem filter: {len(survivors)} clusters kept, {report.stem_count} stems after merging")
    return report


# endregion


# region Pipeline
def run_stem_pipeline(
    voxel_field: VoxelField, dtm: Dtm, config: StemsConfig, stages_dir: Path | None = None
) -> tuple[StemReport, dict[str, PointCloud]]:
    """
    Exports the density field as points and counts the stems in it.

    :param voxel_field: Reconstructed field.
    :param dtm: Terrain model.
    :param config: Pipeline settings.
    :param stages_dir: Directory for the three stage PLY files, none are written when None.
    :return: StemReport and the stage clouds by file name.
    """
    box: HsvBox = HsvBox.from_rgb(rgb=config.foliage_rgb, half_widths=config.hsv_half_widths)
    dense: PointCloud = export_points(
        field=voxel_field, sigma_threshold=config.sigma_threshold, stride=config.stride, oversample=config.oversample
    )
    filtered: PointCloud = crop_points(
        cloud=remove_foliage_points(cloud=dense, box=box),
        dtm=dtm,
        z_low_offset=config.z_low_offset,
        z_high_offset=config.z_high_offset,
    )
    logger.info(f"Exported {len(dense)} points, {len(filtered)} left after foliage removal and cropping")
    spacing: float = float(np.min(voxel_field.voxel_size)) * config.stride / config.oversample
    if len(filtered) == 0:
        logger.warning("No points left after filtering, no stems can be counted")
        report: StemReport = StemReport()
    else:
        labels: NDArray[np.int64] = hdbscan_cluster(
            points=filtered.positions, min_cluster_size=config.min_cluster_size, min_samples=config.min_samples
        )
        report = stem_filter_and_merge(points=filtered.positions, labels=labels, config=config, point_spacing=spacing)
    stems: PointCloud = _stem_cloud(cloud=filtered, report=report)
    stages: dict[str, PointCloud] = dict(zip(STAGE_FILES, (dense, filtered, stems)))
    if stages_dir is not None:
        for name, cloud in stages.items():
            cloud.save(path=Path(stages_dir) / name)
    logger.info(f"Counted {report.stem_count} stems, discarded {report.discarded}")
    return report, stages


def _stem_cloud(cloud: PointCloud, report: StemReport) -> PointCloud:
    """Returns the points of the retained stems, colored per stem."""
    if not report.stems:
        return PointCloud()
    palette: NDArray[np.float64] = np.random.default_rng(0).uniform(0.2, 1.0, size=(report.stem_count, 3))
    indices: NDArray[np.int64] = np.concatenate([stem.indices for stem in report.stems])
    colors: NDArray[np.float64] = np.concatenate(
        [np.tile(palette[i], (len(stem.indices), 1)) for i, stem in enumerate(report.stems)]
    )
    return PointCloud(positions=cloud.positions[indices], colors=colors)


# endregion
