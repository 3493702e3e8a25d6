"""Image quality metrics: multi-scale SSIM, PSNR and the target exposure error."""

import numpy as np
from numpy.typing import NDArray
from scipy.signal import convolve2d
from skimage.transform import downscale_local_mean

from canopeel.misc.exceptions import InputError
from canopeel.misc.imaging import luminance

__all__: tuple[str, ...] = ("MSSSIM_WEIGHTS", "gaussian_window", "msssim", "psnr", "scale_count", "target_error")

MSSSIM_WEIGHTS: NDArray[np.float64] = np.asarray([0.0448, 0.2856, 0.3001, 0.2363, 0.1333])
WINDOW: int = 11
WINDOW_SIGMA: float = 1.5
_C1: float = 0.01**2
_C2: float = 0.03**2


def gaussian_window(size: int = WINDOW, sigma: float = WINDOW_SIGMA) -> NDArray[np.float64]:
    """
    Returns a normalized square Gaussian window.

    :param size: Side in pixels.
    :param sigma: Standard deviation in pixels.
    :return: Window of shape (size, size) summing to 1.
    """
    x: NDArray[np.float64] = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g: NDArray[np.float64] = np.exp(-(x**2) / (2.0 * sigma**2))
    window: NDArray[np.float64] = np.outer(g, g)
    return window / window.sum()


def scale_count(shape: tuple[int, ...], max_scales: int = len(MSSSIM_WEIGHTS)) -> int:
    """
    Returns the number of scales the image supports, the coarsest one must still hold the window.

    :param shape: Image shape.
    :param max_scales: Upper bound.
    :return: Scale count.
    :raises InputError: if the image is smaller than the window.
    """
    side: int = min(shape[:2])
    if side < WINDOW:
        raise InputError(f"Images must be at least {WINDOW} px on each side, got {shape[:2]}")
    count: int = 1
    while count < max_scales and side / 2**count >= WINDOW:
        count += 1
    return count


def _ssim_terms(a: NDArray[np.float64], b: NDArray[np.float64], window: NDArray[np.float64]) -> tuple[float, float]:
    """Returns the mean SSIM and the mean contrast-structure term on one scale."""

    def blur(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return convolve2d(x, window, mode="valid")

    mu_a: NDArray[np.float64] = blur(a)
    mu_b: NDArray[np.float64] = blur(b)
    var_a: NDArray[np.float64] = blur(a * a) - mu_a * mu_a
    var_b: NDArray[np.float64] = blur(b * b) - mu_b * mu_b
    cov: NDArray[np.float64] = blur(a * b) - mu_a * mu_b
    cs: NDArray[np.float64] = (2.0 * cov + _C2) / (var_a + var_b + _C2)
    lum: NDArray[np.float64] = (2.0 * mu_a * mu_b + _C1) / (mu_a * mu_a + mu_b * mu_b + _C1)
    return float(np.mean(lum * cs)), float(np.mean(cs))


def msssim(a: NDArray[np.float64], b: NDArray[np.float64], max_scales: int = len(MSSSIM_WEIGHTS)) -> float:
    """
    Multi-scale SSIM on luminance.

    Uses an 11x11 Gaussian window (sigma 1.5) and the standard five scale weights. Images too
    small for five scales use the coarsest weights renormalized to sum to 1. Negative
    per-scale terms are clamped to 0, so the score lies in [0, 1].

    :param a: Image of shape (H, W, 3) or (H, W).
    :param b: Image of the same shape.
    :param max_scales: Upper bound on the scale count.
    :return: Score in [0, 1].
    :raises InputError: if the shapes differ or the images are smaller than the window.
    """
    if np.shape(a) != np.shape(b):
        raise InputError(f"Cannot compare images of shapes {np.shape(a)} and {np.shape(b)}")
    x: NDArray[np.float64] = luminance(a)
    y: NDArray[np.float64] = luminance(b)
    scales: int = scale_count(shape=x.shape, max_scales=max_scales)
    weights: NDArray[np.float64] = MSSSIM_WEIGHTS[len(MSSSIM_WEIGHTS) - scales :]
    weights = weights / weights.sum()
    window: NDArray[np.float64] = gaussian_window()
    score: float = 1.0
    for level in range(scales):
        ssim, cs = _ssim_terms(x, y, window)
        term: float = max(ssim if level == scales - 1 else cs, 0.0)
        score *= term ** float(weights[level])
        if level < scales - 1:
            rows, cols = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
            x = downscale_local_mean(x[:rows, :cols], (2, 2))
            y = downscale_local_mean(y[:rows, :cols], (2, 2))
    return float(min(score, 1.0))


def psnr(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    """
    Peak signal to noise ratio of linear values with peak 1.

    :param a: Image.
    :param b: Image of the same shape.
    :return: PSNR in dB, inf for identical images.
    :raises InputError: if the shapes differ.
    """
    if np.shape(a) != np.shape(b):
        raise InputError(f"Cannot compare images of shapes {np.shape(a)} and {np.shape(b)}")
    mse: float = float(np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def target_error(render: NDArray[np.float64], reference: NDArray[np.float64], mask: NDArray[np.float64]) -> float:
    """
    Mean absolute color error over the masked pixels.

    :param render: Rendered image (H, W, 3).
    :param reference: Reference image (H, W, 3).
    :param mask: Target mask (H, W), nonzero on target pixels.
    :return: Error, nan when the mask is empty.
    :raises InputError: if the shapes differ.
    """
    if np.shape(render) != np.shape(reference) or np.shape(mask) != np.shape(render)[:2]:
        raise InputError(
            f"Shapes do not match: render {np.shape(render)}, reference {np.shape(reference)}, mask {np.shape(mask)}"
        )
    on: NDArray[np.bool_] = np.asarray(mask) > 0.5
    if not np.any(on):
        return float("nan")
    diff: NDArray[np.float64] = np.abs(np.asarray(render, dtype=np.float64) - np.asarray(reference, dtype=np.float64))
    return float(np.mean(diff[on]))
