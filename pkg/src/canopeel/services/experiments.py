"""Sampling-density sweep: how many views a reconstruction needs before the ground stops improving."""

import csv
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from canopeel.config import logger
from canopeel.misc.dataclasses import CaptureConfig, FieldConfig, TrainConfig
from canopeel.misc.exceptions import InputError, StorageError
from canopeel.services.analysis.metrics import msssim
from canopeel.services.dataset import Dataset, Views
from canopeel.services.render import RenderPolicy, render_image
from canopeel.services.scene import AnalyticScene
from canopeel.services.scene_synth import generate_capture
from canopeel.services.train import FitResult, fit

__all__: tuple[str, ...] = ("SWEEP_HEADER", "VIEW_COUNTS", "SweepRow", "grid_for", "sampling_sweep", "write_sweep")

SWEEP_HEADER: tuple[str, ...] = ("views", "msssim")
VIEW_COUNTS: tuple[int, ...] = (9, 18, 36)


class SweepRow(NamedTuple):
    """
    Result for one view count.

    :param views: Number of training views.
    :param msssim: Mean M-SSIM of crop renders against the canopy-free references.
    :param msssim_std: Standard deviation over the held-out views.
    """

    views: int
    msssim: float
    msssim_std: float


def grid_for(views: int) -> tuple[int, int]:
    """
    Returns the most square (n_x, n_y) grid with the given number of cameras, n_x >= n_y.

    :param views: Camera count.
    :return: Grid shape.
    :raises InputError: if views < 1.
    """
    if views < 1:
        raise InputError(f"View count must be positive, got {views}")
    n_y: int = int(np.floor(np.sqrt(views)))
    while views % n_y:
        n_y -= 1
    return views // n_y, n_y


def _capture_for(base: CaptureConfig, views: int) -> CaptureConfig:
    """Spreads the grid over the area the base grid covers."""
    n_x, n_y = grid_for(views)
    span_x: float = (base.n_x - 1) * base.spacing
    span_y: float = (base.n_y - 1) * (base.spacing if base.spacing_y is None else base.spacing_y)
    return base._replace(
        n_x=n_x,
        n_y=n_y,
        spacing=span_x / (n_x - 1) if n_x > 1 else base.spacing,
        spacing_y=span_y / (n_y - 1) if n_y > 1 else base.spacing,
        holdout_views=0,
    )


def sampling_sweep(
    scene: AnalyticScene,
    capture: CaptureConfig,
    field_config: FieldConfig,
    train_config: TrainConfig,
    view_counts: tuple[int, ...] = VIEW_COUNTS,
    margin: float = 0.3,
    threads: int = 1,
) -> list[SweepRow]:
    """
    Trains one field per view count over the same area and scores crop renders on shared held-out cameras.

    The held-out cameras come from the base capture; every trained capture is spread over the
    area the base grid covers.

    :param scene: Scene.
    :param capture: Base capture, defines the area and the held-out cameras.
    :param field_config: Field layout.
    :param train_config: Training settings.
    :param view_counts: Training view counts, each at least 2.
    :param margin: Crop margin above the terrain.
    :param threads: Worker count.
    :return: One row per view count, in the given order.
    :raises InputError: if the base capture has no held-out views or a count is below 2.
    """
    if capture.holdout_views < 1:
        raise InputError("The sweep needs held-out views to score against")
    if any(count < 2 for count in view_counts):
        raise InputError(f"Every view count must be at least 2, got {view_counts}")
    reference: Dataset = generate_capture(scene=scene, cfg=capture, threads=threads)
    heldout: Views | None = reference.heldout
    if heldout is None or heldout.ground is None:
        raise InputError("The base capture produced no canopy-free references")
    policy: RenderPolicy = RenderPolicy(dtm=scene.dtm, margin=margin)
    rows: list[SweepRow] = []
    for count in view_counts:
        dataset: Dataset = generate_capture(scene=scene, cfg=_capture_for(base=capture, views=count), threads=threads)
        result: FitResult = fit(
            dataset=dataset, field_config=field_config, train_config=train_config, threads=threads
        )
        scores: NDArray[np.float64] = np.asarray(
            [
                msssim(
                    render_image(
                        field=result.field,
                        camera=camera,
                        policy=policy,
                        n_samples=train_config.n_samples,
                        background=scene.background,
                        threads=threads,
                    ),
                    ground,
                )
                for camera, ground in zip(heldout.cameras, heldout.ground)
            ]
        )
        rows.append(SweepRow(views=count, msssim=float(scores.mean()), msssim_std=float(scores.std())))
        logger.info(f"Sweep with {count} views: M-SSIM {rows[-1].msssim:.4f} +- {rows[-1].msssim_std:.4f}")
    return rows


def write_sweep(path: Path, rows: list[SweepRow]) -> None:
    """
    Writes the sweep as a views,msssim CSV.

    :param path: Output file.
    :param rows: Sweep rows.
    :raises StorageError: if the file cannot be written.
    """
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as stream:
            writer = csv.writer(stream)
            writer.writerow(SWEEP_HEADER)
            writer.writerows([row.views, repr(row.msssim)] for row in rows)
    except OSError as exc:
        raise StorageError(f"Cannot write sweep results {path}: {exc}") from exc
