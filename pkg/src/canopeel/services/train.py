"""
Photometric losses, ray batching and the optimization loop fitting a voxel field to a dataset.

Losses are written for linear radiometry. The low-light loss divides each residual by the
prediction itself, held constant for the gradient, so dark pixels weigh more.
"""

import csv
import time
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from canopeel.config import logger
from canopeel.misc.dataclasses import FieldConfig, TrainConfig
from canopeel.misc.exceptions import InputError, NumericalError, StorageError
from canopeel.services.dataset import Dataset
from canopeel.services.field import VoxelField, field_from_config, load_checkpoint, save_checkpoint
from canopeel.services.geometry import RayBundle, camera_rays
from canopeel.services.render import RenderBatch, SparseGrad, clip_rays_to_field, render_rays, render_rays_backward

__all__: tuple[str, ...] = (
    "LOG_HEADER",
    "LOSS_KINDS",
    "AdamState",
    "FitResult",
    "LossValue",
    "RayBatch",
    "StepResult",
    "check_train_config",
    "fit",
    "loss_l1",
    "loss_raw",
    "photometric_loss",
    "sample_ray_batch",
    "train_step",
    "visibility_bce",
)

LOG_HEADER: tuple[str, ...] = ("step", "loss", "grad_norm", "elapsed_s")
LOSS_KINDS: tuple[str, ...] = ("l1", "raw", "l1+raw")
# Fixed entry time, so identical states give identical sidecars
_ZIP_TIME: tuple[int, int, int, int, int, int] = (1980, 1, 1, 0, 0, 0)


# region Types
@dataclass(frozen=True, eq=False)
class RayBatch:
    """
    Rays with their supervision.

    :param rays: Rays.
    :param target_colors: Linear RGB per ray (N, 3).
    :param target_visibility: Visibility per ray (N,), None without segmentation maps.
    :param view_index: Source view per ray.
    :param px: Source pixel column per ray.
    :param py: Source pixel row per ray.
    """

    rays: RayBundle
    target_colors: NDArray[np.float64]
    target_visibility: NDArray[np.float64] | None = None
    view_index: NDArray[np.int64] | None = None
    px: NDArray[np.int64] | None = None
    py: NDArray[np.int64] | None = None

    def __post_init__(self) -> None:
        count: int = len(self.rays)
        if self.target_colors.shape != (count, 3):
            raise InputError(f"Expected {count} target colors, got an array of shape {self.target_colors.shape}")
        if self.target_visibility is not None and self.target_visibility.shape != (count,):
            raise InputError(f"Expected {count} target visibilities, got shape {self.target_visibility.shape}")
        if np.any((self.target_colors < 0) | (self.target_colors > 1)):
            raise InputError("Target colors must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.rays)

    def describe(self, index: int) -> str:
        """
        Names a ray for diagnostics.

        :param index: Ray index in the batch.
        :return: Description.
        """
        if self.view_index is None or self.px is None or self.py is None:
            return f"ray {index}"
        return f"ray {index} (view {self.view_index[index]}, pixel {self.px[index]},{self.py[index]})"


class LossValue(NamedTuple):
    """
    Loss with its gradient.

    :param value: Scalar loss.
    :param grad: Gradient with respect to the prediction, shaped like it.
    """

    value: float
    grad: NDArray[np.float64]


@dataclass(eq=False)
class AdamState:
    """
    Adam moments of every raw parameter.

    :param step: Number of updates applied.
    :param m: First moments (n_voxels, 5).
    :param v: Second moments (n_voxels, 5).
    """

    step: int
    m: NDArray[np.float64]
    v: NDArray[np.float64]

    @classmethod
    def zeros(cls, n_voxels: int) -> "AdamState":
        """
        Returns a fresh state.

        :param n_voxels: Voxel count of the field.
        :return: AdamState.
        """
        return cls(step=0, m=np.zeros((n_voxels, 5)), v=np.zeros((n_voxels, 5)))

    def save(self, path: Path) -> None:
        """
        Writes the state as an uncompressed npz sidecar with fixed entry times.

        :param path: Output file.
        :raises StorageError: if the file cannot be written.
        """
        try:
            with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as archive:
                for name, array in (("step", np.array(self.step)), ("m", self.m), ("v", self.v)):
                    info: zipfile.ZipInfo = zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_TIME)
                    with archive.open(info, "w", force_zip64=True) as entry:
                        np.lib.format.write_array(entry, np.asanyarray(array), allow_pickle=False)
        except OSError as exc:
            raise StorageError(f"Cannot write optimizer state {path}: {exc}") from exc

    @classmethod
    def load(cls, path: Path) -> "AdamState":
        """
        Reads a state written by save.

        :param path: Sidecar file.
        :return: AdamState.
        :raises StorageError: if the file cannot be read.
        """
        try:
            with np.load(path) as data:
                return cls(step=int(data["step"]), m=data["m"].copy(), v=data["v"].copy())
        except (OSError, KeyError, ValueError) as exc:
            raise StorageError(f"Cannot read optimizer state {path}: {exc}") from exc


class StepResult(NamedTuple):
    """
    Outcome of one optimization step.

    :param loss: Loss before the update.
    :param grad_norm: Norm of the gradient over the raw parameters.
    :param state: Updated optimizer state.
    """

    loss: float
    grad_norm: float
    state: AdamState


class FitResult(NamedTuple):
    """
    Outcome of a training run.

    :param field: Trained field.
    :param log: Rows (step, loss, grad_norm, elapsed_s).
    """

    field: VoxelField
    log: list[tuple[int, float, float, float]]


# endregion


# region Losses
def loss_l1(predicted: NDArray[np.float64], target: NDArray[np.float64]) -> LossValue:
    """
    Sum of absolute residuals over rays and channels.

    :param predicted: Predicted colors (N, 3).
    :param target: Target colors (N, 3).
    :return: LossValue, the subgradient is 0 at exact ties.
    :raises InputError: if the shapes differ.
    """
    if np.shape(predicted) != np.shape(target):
        raise InputError(f"Shapes differ: {np.shape(predicted)} and {np.shape(target)}")
    residual: NDArray[np.float64] = np.asarray(predicted, dtype=np.float64) - target
    return LossValue(value=float(np.sum(np.abs(residual))), grad=np.sign(residual))


def loss_raw(predicted: NDArray[np.float64], target: NDArray[np.float64], epsilon: float) -> LossValue:
    """
    Sum over rays and channels of ((pred - target) / (sg(pred) + epsilon))^2.

    sg stops the gradient, so the gradient is 2 * (pred - target) / (pred + epsilon)^2.

    :param predicted: Predicted colors (N, 3).
    :param target: Target colors (N, 3).
    :param epsilon: Denominator tolerance.
    :return: LossValue.
    :raises InputError: if epsilon is not positive or the shapes differ.
    """
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    if np.shape(predicted) != np.shape(target):
        raise InputError(f"Shapes differ: {np.shape(predicted)} and {np.shape(target)}")
    pred: NDArray[np.float64] = np.asarray(predicted, dtype=np.float64)
    scale: NDArray[np.float64] = 1.0 / (pred + epsilon)
    residual: NDArray[np.float64] = (pred - target) * scale
    return LossValue(value=float(np.sum(residual**2)), grad=2.0 * residual * scale)


def photometric_loss(predicted: NDArray[np.float64], target: NDArray[np.float64], config: TrainConfig) -> LossValue:
    """
    Returns the loss selected by config.loss_kind; "l1+raw" adds raw_weight times the low-light loss.

    :param predicted: Predicted colors (N, 3).
    :param target: Target colors (N, 3).
    :param config: Training settings.
    :return: LossValue.
    :raises InputError: if the loss kind is unknown.
    """
    if config.loss_kind == "l1":
        return loss_l1(predicted=predicted, target=target)
    if config.loss_kind == "raw":
        return loss_raw(predicted=predicted, target=target, epsilon=config.epsilon)
    if config.loss_kind == "l1+raw":
        l1: LossValue = loss_l1(predicted=predicted, target=target)
        raw: LossValue = loss_raw(predicted=predicted, target=target, epsilon=config.epsilon)
        return LossValue(value=l1.value + config.raw_weight * raw.value, grad=l1.grad + config.raw_weight * raw.grad)
    raise InputError(f"Unknown loss kind {config.loss_kind!r}, expected one of {', '.join(LOSS_KINDS)}")


def visibility_bce(predicted: NDArray[np.float64], target: NDArray[np.float64]) -> LossValue:
    """
    Sum of binary cross-entropies, the prediction is clipped to [1e-6, 1 - 1e-6].

    :param predicted: Rendered visibility per ray.
    :param target: Target visibility per ray.
    :return: LossValue.
    """
    p: NDArray[np.float64] = np.clip(np.asarray(predicted, dtype=np.float64), 1e-6, 1.0 - 1e-6)
    t: NDArray[np.float64] = np.asarray(target, dtype=np.float64)
    value: float = float(-np.sum(t * np.log(p) + (1.0 - t) * np.log1p(-p)))
    return LossValue(value=value, grad=(p - t) / (p * (1.0 - p)))


# endregion


# region Batching
def sample_ray_batch(
    dataset: Dataset, batch_size: int, rng: np.random.Generator, exhaustive: bool = False
) -> RayBatch:
    """
    Draws pixels uniformly over every (image, pixel) pair of the training views.

    :param dataset: Dataset.
    :param batch_size: Rays per batch.
    :param rng: Generator.
    :param exhaustive: Draw without replacement, a batch of every pixel visits each one exactly once.
    :return: RayBatch with linear target colors and, with segmentation maps, target visibility.
    :raises InputError: if the dataset is empty or batch_size is below 1.
    """
    total: int = dataset.train.pixel_count
    if total == 0:
        raise InputError("Dataset has no pixels")
    if batch_size < 1:
        raise InputError(f"batch_size must be at least 1, got {batch_size}")
    if exhaustive:
        flat: NDArray[np.int64] = rng.permutation(total)[: min(batch_size, total)]
    else:
        flat = rng.integers(0, total, size=batch_size)
    sizes: NDArray[np.int64] = np.array([c.width * c.height for c in dataset.cameras], dtype=np.int64)
    starts: NDArray[np.int64] = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    view: NDArray[np.int64] = np.searchsorted(starts, flat, side="right") - 1
    local: NDArray[np.int64] = flat - starts[view]
    widths: NDArray[np.int64] = np.array([c.width for c in dataset.cameras], dtype=np.int64)[view]
    px: NDArray[np.int64] = local % widths
    py: NDArray[np.int64] = local // widths

    count: int = len(flat)
    origins: NDArray[np.float64] = np.empty((count, 3))
    directions: NDArray[np.float64] = np.empty((count, 3))
    colors: NDArray[np.float64] = np.empty((count, 3))
    visibility: NDArray[np.float64] | None = None if dataset.segmentation is None else np.empty(count)
    for index in np.unique(view):
        rows: NDArray[np.int64] = np.flatnonzero(view == index)
        bundle: RayBundle = camera_rays(camera=dataset.cameras[index], px=px[rows], py=py[rows])
        origins[rows] = bundle.origins
        directions[rows] = bundle.directions
        colors[rows] = np.clip(dataset.images[index][py[rows], px[rows], :3], 0.0, 1.0)
        if visibility is not None and dataset.segmentation is not None:
            visibility[rows] = dataset.segmentation[index][py[rows], px[rows]]
    rays: RayBundle = RayBundle(
        origins=origins, directions=directions, t_near=np.zeros(count), t_far=np.full(count, 1.0e4)
    )
    return RayBatch(
        rays=rays, target_colors=colors, target_visibility=visibility, view_index=view, px=px, py=py
    )


# endregion


# region Optimization
def check_train_config(config: TrainConfig) -> None:
    """
    Validates the training settings.

    :param config: Training settings.
    :raises InputError: on the first invalid value.
    """
    if config.loss_kind not in LOSS_KINDS:
        raise InputError(f"Unknown loss kind {config.loss_kind!r}, expected one of {', '.join(LOSS_KINDS)}")
    if not config.epsilon > 0:
        raise InputError(f"epsilon must be positive, got {config.epsilon}")
    if config.batch_size < 1 or config.n_samples < 1:
        raise InputError("batch_size and n_samples must be at least 1")
    if config.learning_rate < 0:
        raise InputError(f"learning_rate must not be negative, got {config.learning_rate}")
    if not (0.0 <= config.beta1 < 1.0 and 0.0 <= config.beta2 < 1.0):
        raise InputError(f"Adam betas must lie in [0, 1), got {config.beta1} and {config.beta2}")
    if config.step_count < 0 or config.visibility_loss_weight < 0:
        raise InputError("step_count and visibility_loss_weight must not be negative")


def _adam_update(field: VoxelField, grad: SparseGrad, config: TrainConfig, state: AdamState) -> AdamState:
    """
    Applies one lazy Adam update; only the voxels in grad change, moments of the others stay as they are.

    :param field: Field, updated in place.
    :param grad: Sparse gradient.
    :param config: Training settings.
    :param state: Optimizer state, updated in place.
    :return: The state.
    """
    state.step += 1
    ids: NDArray[np.int64] = grad.voxel_ids
    if len(ids) == 0:
        return state
    m: NDArray[np.float64] = config.beta1 * state.m[ids] + (1.0 - config.beta1) * grad.values
    v: NDArray[np.float64] = config.beta2 * state.v[ids] + (1.0 - config.beta2) * grad.values**2
    state.m[ids] = m
    state.v[ids] = v
    m_hat: NDArray[np.float64] = m / (1.0 - config.beta1**state.step)
    v_hat: NDArray[np.float64] = v / (1.0 - config.beta2**state.step)
    flat: NDArray[np.float64] = field.flat_params
    flat[ids] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return state


def train_step(
    field: VoxelField,
    batch: RayBatch,
    config: TrainConfig,
    opt_state: AdamState,
    rng_seed: int | None = None,
    threads: int = 1,
) -> StepResult:
    """
    Renders the batch in full mode, computes the mean per-ray loss and applies one Adam update.

    The loss is the photometric loss plus visibility_loss_weight times the cross-entropy between
    the rendered and the target visibility, for rays that carry a target.

    :param field: Field, updated in place.
    :param batch: Rays with their targets.
    :param config: Training settings.
    :param opt_state: Optimizer state.
    :param rng_seed: Seed of the sample jitter, config.rng_seed when None.
    :param threads: Worker count.
    :return: StepResult.
    :raises NumericalError: if the loss of some ray is not finite.
    """
    seed: int = config.rng_seed if rng_seed is None else rng_seed
    rays: RayBundle = clip_rays_to_field(field=field, rays=batch.rays)
    forward: RenderBatch = render_rays(
        field=field,
        rays=rays,
        n_samples=config.n_samples,
        jitter=True,
        rng_seed=seed,
        background=config.background,
        threads=threads,
    )
    count: int = len(batch)
    photometric: LossValue = photometric_loss(predicted=forward.color, target=batch.target_colors, config=config)
    finite: NDArray[np.bool_] = np.all(np.isfinite(photometric.grad), axis=1)
    loss: float = photometric.value
    upstream_visibility: NDArray[np.float64] = np.zeros(count)
    if batch.target_visibility is not None and config.visibility_loss_weight > 0:
        bce: LossValue = visibility_bce(predicted=forward.visibility, target=batch.target_visibility)
        loss += config.visibility_loss_weight * bce.value
        upstream_visibility = config.visibility_loss_weight * bce.grad / count
        finite &= np.isfinite(bce.grad)
    loss /= count
    if not np.isfinite(loss):
        offending: NDArray[np.int64] = np.flatnonzero(~finite)
        culprit: str = batch.describe(int(offending[0])) if len(offending) else "no single ray"
        raise NumericalError(f"Non-finite loss {loss} at step {opt_state.step + 1}, first offending {culprit}")

    _, grad = render_rays_backward(
        field=field,
        rays=rays,
        n_samples=config.n_samples,
        upstream_color=photometric.grad / count,
        upstream_visibility=upstream_visibility,
        jitter=True,
        rng_seed=seed,
        background=config.background,
        threads=threads,
    )
    grad_norm: float = grad.norm()
    state: AdamState = _adam_update(field=field, grad=grad, config=config, state=opt_state)
    return StepResult(loss=loss, grad_norm=grad_norm, state=state)


def _checkpoint(path: Path, field: VoxelField, state: AdamState) -> None:
    save_checkpoint(path=path, field=field)
    state.save(path=path.with_name(path.name + ".opt.npz"))


def fit(
    dataset: Dataset,
    field_config: FieldConfig,
    train_config: TrainConfig,
    out_dir: Path | None = None,
    resume: Path | None = None,
    threads: int = 1,
) -> FitResult:
    """
    Runs step_count training steps on a fresh field, or continues a checkpointed run.

    With an output directory the run writes train_log.csv, periodic checkpoints under
    checkpoints/ and the final field.cnpl, each checkpoint with its optimizer sidecar.
    Batches and jitter are seeded per step, so a resumed run continues the same sequence.

    :param dataset: Training data.
    :param field_config: Field layout for a fresh field.
    :param train_config: Training settings.
    :param out_dir: Output directory.
    :param resume: Checkpoint to continue from; its .opt.npz sidecar must exist.
    :param threads: Worker count.
    :return: FitResult.
    :raises InputError: if the dataset has fewer than 2 views or the settings are invalid.
    """
    check_train_config(config=train_config)
    if len(dataset.cameras) < 2:
        raise InputError(f"Training needs at least 2 views, the dataset has {len(dataset.cameras)}")
    if resume is not None:
        field: VoxelField = load_checkpoint(path=resume)
        state: AdamState = AdamState.load(path=Path(resume).with_name(Path(resume).name + ".opt.npz"))
        logger.info(f"Resuming from {resume} at step {state.step}")
    else:
        field = field_from_config(config=field_config, dtm=dataset.dtm)
        state = AdamState.zeros(n_voxels=field.n_voxels)

    log_path: Path | None = None
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        log_path = Path(out_dir) / "train_log.csv"
        if resume is None or not log_path.is_file():
            with open(log_path, "w", newline="", encoding="utf-8") as stream:
                csv.writer(stream).writerow(LOG_HEADER)

    rows: list[tuple[int, float, float, float]] = []
    started: float = time.perf_counter()
    first: int = state.step
    for step in range(first + 1, train_config.step_count + 1):
        rng: np.random.Generator = np.random.default_rng([train_config.rng_seed, step])
        batch: RayBatch = sample_ray_batch(dataset=dataset, batch_size=train_config.batch_size, rng=rng)
        result: StepResult = train_step(
            field=field,
            batch=batch,
            config=train_config,
            opt_state=state,
            rng_seed=int(rng.integers(0, 2**31)),
            threads=threads,
        )
        state = result.state
        row: tuple[int, float, float, float] = (step, result.loss, result.grad_norm, time.perf_counter() - started)
        rows.append(row)
        if log_path is not None:
            with open(log_path, "a", newline="", encoding="utf-8") as stream:
                csv.writer(stream).writerow([row[0], repr(row[1]), repr(row[2]), f"{row[3]:.3f}"])
        if train_config.log_every > 0 and step % train_config.log_every == 0:
            logger.info(
                f"Step {step}/{train_config.step_count}: loss {result.loss:.6f}, grad norm {result.grad_norm:.4g}"
            )
        if out_dir is not None and train_config.checkpoint_every > 0 and step % train_config.checkpoint_every == 0:
            _checkpoint(path=Path(out_dir) / "checkpoints" / f"step_{step:06d}.cnpl", field=field, state=state)
    if out_dir is not None:
        _checkpoint(path=Path(out_dir) / "field.cnpl", field=field, state=state)
    logger.info(f"Training finished after {state.step} steps in {time.perf_counter() - started:.1f} s")
    return FitResult(field=field, log=rows)


# endregion
