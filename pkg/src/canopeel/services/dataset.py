"""
Posed image datasets and their directory layout.

A dataset directory holds cameras.json, images/, optional seg/ masks, dtm.json, an optional
scene.json, optional oracle/ references for the training views and an optional heldout/
subdirectory with the evaluation views.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from canopeel.config import logger
from canopeel.misc.exceptions import InputError, StorageError
from canopeel.misc.imaging import (
    read_float_image,
    read_png,
    read_png_linear,
    write_float_image,
    write_png,
    write_png_linear,
)
from canopeel.services.geometry import Camera, Dtm, load_cameras, load_dtm, save_cameras, save_dtm
from canopeel.services.scene import AnalyticScene, load_scene, save_scene

__all__: tuple[str, ...] = ("Dataset", "Views", "load_dataset", "save_dataset", "view_name")


@dataclass(eq=False)
class Views:
    """
    Cameras with their images and optional per-view references.

    :param cameras: Cameras.
    :param images: Linear images (H, W, 3).
    :param segmentation: Masks (H, W), 1 where the ground is visible, 0 under canopy.
    :param ground: Canopy-free reference images.
    :param targets: Masks (H, W) of pixels showing a target in the canopy-free reference.
    """

    cameras: list[Camera]
    images: list[NDArray[np.float64]]
    segmentation: list[NDArray[np.float64]] | None = None
    ground: list[NDArray[np.float64]] | None = None
    targets: list[NDArray[np.float64]] | None = None

    def __post_init__(self) -> None:
        if len(self.cameras) != len(self.images):
            raise InputError(f"{len(self.cameras)} cameras but {len(self.images)} images")
        for camera, image in zip(self.cameras, self.images):
            if image.shape[:2] != (camera.height, camera.width):
                raise InputError(f"Image of shape {image.shape[:2]} for a {camera.width}x{camera.height} camera")
        for name in ("segmentation", "ground", "targets"):
            extra: list[NDArray[np.float64]] | None = getattr(self, name)
            if extra is not None and len(extra) != len(self.images):
                raise InputError(f"{len(extra)} {name} maps for {len(self.images)} images")

    def __len__(self) -> int:
        return len(self.cameras)

    @property
    def pixel_count(self) -> int:
        """
        Returns the number of pixels over all views.

        :return: Pixel count.
        """
        return sum(camera.width * camera.height for camera in self.cameras)


@dataclass(eq=False)
class Dataset:
    """
    Training views, terrain and optional evaluation material.

    :param train: Training views.
    :param dtm: Terrain model.
    :param scene: Scene the views were synthesized from.
    :param heldout: Evaluation views.
    :param metadata: Free-form values recorded with the capture.
    """

    train: Views
    dtm: Dtm
    scene: AnalyticScene | None = None
    heldout: Views | None = None
    metadata: dict[str, float] = field(default_factory=dict)

    @property
    def cameras(self) -> list[Camera]:
        """
        Returns the training cameras.

        :return: Cameras.
        """
        return self.train.cameras

    @property
    def images(self) -> list[NDArray[np.float64]]:
        """
        Returns the training images.

        :return: Linear images.
        """
        return self.train.images

    @property
    def segmentation(self) -> list[NDArray[np.float64]] | None:
        """
        Returns the training segmentation maps.

        :return: Masks or None.
        """
        return self.train.segmentation


# region Files
def view_name(index: int) -> str:
    """
    Returns the file name of a view image, shared by images, masks and references.

    :param index: View index.
    :return: File name.
    """
    return f"view_{index:03d}.png"


def _save_views(root: Path, views: Views, images_dir: str) -> None:
    save_cameras(
        path=root / "cameras.json",
        cameras=[(camera, f"{images_dir}/{view_name(i)}") for i, camera in enumerate(views.cameras)],
    )
    for i, image in enumerate(views.images):
        write_png_linear(path=root / images_dir / view_name(i), image=image)
    if views.segmentation is not None:
        for i, mask in enumerate(views.segmentation):
            write_png(path=root / "seg" / view_name(i), image=mask)
    if views.ground is not None:
        ground_dir: Path = root / ("ground" if images_dir == "full" else "oracle/ground")
        for i, image in enumerate(views.ground):
            write_png_linear(path=ground_dir / view_name(i), image=image)
            write_float_image(path=(ground_dir / view_name(i)).with_suffix(".cnpf"), image=image)
    if views.targets is not None:
        target_dir: Path = root / ("targets" if images_dir == "full" else "oracle/targets")
        for i, mask in enumerate(views.targets):
            write_png(path=target_dir / view_name(i), image=mask)


def save_dataset(path: Path, dataset: Dataset) -> None:
    """
    Writes the dataset directory.

    :param path: Output directory.
    :param dataset: Dataset.
    :raises StorageError: if a file cannot be written.
    """
    root: Path = Path(path)
    _save_views(root=root, views=dataset.train, images_dir="images")
    save_dtm(path=root / "dtm.json", dtm=dataset.dtm)
    if dataset.scene is not None:
        save_scene(path=root / "scene.json", scene=dataset.scene)
    if dataset.heldout is not None:
        _save_views(root=root / "heldout", views=dataset.heldout, images_dir="full")
    logger.info(f"Wrote dataset with {len(dataset.train)} views to {root}")


def _read_optional(directory: Path, count: int, linear: bool) -> list[NDArray[np.float64]] | None:
    if not directory.is_dir():
        return None
    maps: list[NDArray[np.float64]] = []
    for i in range(count):
        sidecar: Path = (directory / view_name(i)).with_suffix(".cnpf")
        if linear and sidecar.is_file():
            maps.append(read_float_image(path=sidecar))
        elif linear:
            maps.append(read_png_linear(path=directory / view_name(i)))
        else:
            mask: NDArray[np.float64] = read_png(path=directory / view_name(i))
            maps.append(mask if mask.ndim == 2 else mask[..., 0])
    return maps


def _load_views(root: Path, images_dir: str) -> Views:
    records: list[tuple[Camera, str]] = load_cameras(path=root / "cameras.json")
    cameras: list[Camera] = [camera for camera, _ in records]
    images: list[NDArray[np.float64]] = [
        read_png_linear(path=root / (image or f"{images_dir}/{view_name(i)}")) for i, (_, image) in enumerate(records)
    ]
    oracle: str = "" if images_dir == "full" else "oracle/"
    return Views(
        cameras=cameras,
        images=images,
        segmentation=_read_optional(directory=root / "seg", count=len(cameras), linear=False),
        ground=_read_optional(directory=root / f"{oracle}ground", count=len(cameras), linear=True),
        targets=_read_optional(directory=root / f"{oracle}targets", count=len(cameras), linear=False),
    )


def load_dataset(path: Path) -> Dataset:
    """
    Reads a dataset directory.

    :param path: Dataset directory.
    :return: Dataset.
    :raises StorageError: if a required file is missing or malformed.
    """
    root: Path = Path(path)
    if not (root / "cameras.json").is_file():
        raise StorageError(f"{root} is not a dataset directory (no cameras.json)")
    try:
        train: Views = _load_views(root=root, images_dir="images")
    except InputError as exc:
        raise StorageError(f"Dataset {root} is inconsistent: {exc}") from exc
    heldout: Views | None = None
    if (root / "heldout" / "cameras.json").is_file():
        heldout = _load_views(root=root / "heldout", images_dir="full")
    scene: AnalyticScene | None = load_scene(path=root / "scene.json") if (root / "scene.json").is_file() else None
    logger.debug(f"Loaded dataset {root}: {len(train)} views, heldout {0 if heldout is None else len(heldout)}")
    return Dataset(train=train, dtm=load_dtm(path=root / "dtm.json"), scene=scene, heldout=heldout)


# endregion
