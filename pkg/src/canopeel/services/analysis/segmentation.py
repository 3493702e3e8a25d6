"""Canopy segmentation with a box in HSV space around a user-picked color."""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from skimage.color import rgb2hsv

from canopeel.misc.exceptions import InputError

__all__: tuple[str, ...] = ("DEFAULT_HALF_WIDTHS", "HsvBox", "hsv_box_segment", "in_hsv_box", "to_hsv")

DEFAULT_HALF_WIDTHS: tuple[float, float, float] = (0.08, 0.35, 0.45)


def to_hsv(rgb: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Converts RGB values in [0, 1] to HSV with the hexcone model, hue in [0, 1).

    :param rgb: Array of shape (..., 3).
    :return: HSV array of the same shape.
    :raises InputError: if the last axis is not 3.
    """
    values: NDArray[np.float64] = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    if values.ndim == 0 or values.shape[-1] != 3:
        raise InputError(f"RGB values must have a last axis of 3, got shape {values.shape}")
    flat: NDArray[np.float64] = values.reshape(-1, 1, 3)
    return np.asarray(rgb2hsv(flat), dtype=np.float64).reshape(values.shape)


@dataclass(frozen=True)
class HsvBox:
    """
    Box in HSV space, hue distance is circular.

    :param hue: Seed hue in [0, 1].
    :param saturation: Seed saturation in [0, 1].
    :param value: Seed value in [0, 1].
    :param half_widths: Half-widths (hue, saturation, value), each in [0, 1].
    """

    hue: float
    saturation: float
    value: float
    half_widths: tuple[float, float, float] = DEFAULT_HALF_WIDTHS

    def __post_init__(self) -> None:
        for name in ("hue", "saturation", "value"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InputError(f"HSV seed {name} must be in [0, 1], got {getattr(self, name)}")
        if len(self.half_widths) != 3 or not all(0.0 <= w <= 1.0 for w in self.half_widths):
            raise InputError(f"HSV half-widths must be three values in [0, 1], got {self.half_widths}")

    @classmethod
    def from_rgb(
        cls, rgb: tuple[float, ...] | NDArray[np.float64], half_widths: tuple[float, ...] = DEFAULT_HALF_WIDTHS
    ) -> "HsvBox":
        """
        Builds the box around the HSV of a seed color, for example a pixel picked by the user.

        :param rgb: Seed color in [0, 1].
        :param half_widths: Half-widths (hue, saturation, value).
        :return: HsvBox.
        """
        h, s, v = (float(c) for c in to_hsv(np.asarray(rgb, dtype=np.float64).reshape(3)))
        return cls(hue=h, saturation=s, value=v, half_widths=(half_widths[0], half_widths[1], half_widths[2]))


def in_hsv_box(hsv: NDArray[np.float64], box: HsvBox) -> NDArray[np.bool_]:
    """
    Tests HSV values against the box.

    :param hsv: HSV array of shape (..., 3).
    :param box: HsvBox.
    :return: Boolean array of shape (...), True inside the box.
    """
    dh: NDArray[np.float64] = np.abs(hsv[..., 0] - box.hue) % 1.0
    dh = np.minimum(dh, 1.0 - dh)
    return (
        (dh <= box.half_widths[0])
        & (np.abs(hsv[..., 1] - box.saturation) <= box.half_widths[1])
        & (np.abs(hsv[..., 2] - box.value) <= box.half_widths[2])
    )


def hsv_box_segment(image: NDArray[np.float64], box: HsvBox) -> NDArray[np.float64]:
    """
    Flags canopy pixels, those whose color falls in the box.

    :param image: RGB image of shape (H, W, 3) in [0, 1].
    :param box: HsvBox around the canopy color.
    :return: Mask of shape (H, W), 1 = keep (ground), 0 = canopy.
    :raises InputError: if the image is not RGB.
    """
    img: NDArray[np.float64] = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InputError(f"Segmentation needs an RGB image, got shape {img.shape}")
    return np.where(in_hsv_box(hsv=to_hsv(img), box=box), 0.0, 1.0)
