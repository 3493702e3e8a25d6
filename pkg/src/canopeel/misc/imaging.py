"""Image encoding: sRGB transfer, 8-bit PNG files and the linear float sidecar."""

import struct
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from PIL import Image

from canopeel.misc.exceptions import StorageError

__all__: tuple[str, ...] = (
    "linear_to_srgb",
    "luminance",
    "read_float_image",
    "read_png",
    "read_png_linear",
    "srgb_to_linear",
    "write_float_image",
    "write_png",
    "write_png_linear",
)

_FLOAT_MAGIC: bytes = b"CNPF"
_FLOAT_VERSION: int = 1
_FLOAT_HEADER: struct.Struct = struct.Struct("<4sIIII")


def srgb_to_linear(values: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Decodes sRGB values in [0, 1] to linear radiometry.

    :param values: sRGB encoded values.
    :return: Linear values.
    """
    v: NDArray[np.float64] = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(values: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Encodes linear values in [0, 1] with the sRGB transfer function.

    :param values: Linear values.
    :return: sRGB encoded values.
    """
    v: NDArray[np.float64] = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.where(v <= 0.0031308, v * 12.92, 1.055 * v ** (1.0 / 2.4) - 0.055)


def luminance(image: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Returns the luma of an RGB image, grayscale images are returned as they are.

    :param image: Image of shape (H, W, 3) or (H, W).
    :return: Luminance of shape (H, W).
    """
    img: NDArray[np.float64] = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        return img
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def write_png(path: Path, image: NDArray[np.float64]) -> None:
    """
    Writes values in [0, 1] as an 8-bit PNG without any transfer function.

    :param path: Output file.
    :param image: Image of shape (H, W, 3) or (H, W).
    :raises StorageError: if the file cannot be written.
    """
    data: NDArray[np.uint8] = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(data).save(path, format="PNG")
    except OSError as exc:
        raise StorageError(f"Cannot write image {path}: {exc}") from exc


def write_png_linear(path: Path, image: NDArray[np.float64]) -> None:
    """
    Writes a linear RGB image as an 8-bit sRGB PNG.

    :param path: Output file.
    :param image: Linear image of shape (H, W, 3).
    """
    write_png(path=path, image=linear_to_srgb(image))


def read_png(path: Path) -> NDArray[np.float64]:
    """
    Reads an 8-bit PNG as values in [0, 1] without any transfer function.

    :param path: Input file.
    :return: Image of shape (H, W, 3) for color files, (H, W) for grayscale ones.
    :raises StorageError: if the file cannot be read.
    """
    try:
        with Image.open(path) as img:
            mode: str = "L" if img.mode in ("L", "1", "I", "I;16") else "RGB"
            data: NDArray[np.uint8] = np.asarray(img.convert(mode))
    except OSError as exc:
        raise StorageError(f"Cannot read image {path}: {exc}") from exc
    return data.astype(np.float64) / 255.0


def read_png_linear(path: Path) -> NDArray[np.float64]:
    """
    Reads an 8-bit sRGB PNG as a linear RGB image.

    :param path: Input file.
    :return: Linear image of shape (H, W, 3).
    """
    return srgb_to_linear(read_png(path=path))


def write_float_image(path: Path, image: NDArray[np.float64]) -> None:
    """
    Writes a linear image as a little-endian f32 raster with a "CNPF" header.

    Header layout: magic, version, height, width and channel count as u32.

    :param path: Output file.
    :param image: Image of shape (H, W, C) or (H, W).
    :raises StorageError: if the file cannot be written.
    """
    img: NDArray[np.float64] = np.asarray(image)
    if img.ndim == 2:
        img = img[..., None]
    height, width, channels = img.shape
    header: bytes = _FLOAT_HEADER.pack(_FLOAT_MAGIC, _FLOAT_VERSION, height, width, channels)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(header + img.astype("<f4").tobytes(order="C"))
    except OSError as exc:
        raise StorageError(f"Cannot write float image {path}: {exc}") from exc


def read_float_image(path: Path) -> NDArray[np.float64]:
    """
    Reads a raster written by write_float_image.

    :param path: Input file.
    :return: Image of shape (H, W, C), or (H, W) for single channel rasters.
    :raises StorageError: if the file cannot be read or has a wrong layout.
    """
    try:
        raw: bytes = Path(path).read_bytes()
    except OSError as exc:
        raise StorageError(f"Cannot read float image {path}: {exc}") from exc
    if len(raw) < _FLOAT_HEADER.size:
        raise StorageError(f"Float image {path} is truncated")
    magic, version, height, width, channels = _FLOAT_HEADER.unpack_from(raw)
    if magic != _FLOAT_MAGIC or version != _FLOAT_VERSION:
        raise StorageError(f"{path} is not a float image (magic {magic!r}, version {version})")
    expected: int = _FLOAT_HEADER.size + height * width * channels * 4
    if len(raw) != expected:
        raise StorageError(f"Float image {path} has {len(raw)} bytes, expected {expected}")
    data: NDArray[np.float64] = (
        np.frombuffer(raw, dtype="<f4", offset=_FLOAT_HEADER.size).astype(np.float64).reshape(height, width, channels)
    )
    return data[..., 0] if channels == 1 else data
