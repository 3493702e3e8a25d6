"""Exposure diagnostics: luminance histograms and the bimodality test for direct light."""

from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray
from scipy.signal import find_peaks
from scipy.stats import kurtosis, skew

from canopeel.misc.exceptions import InputError
from canopeel.misc.imaging import luminance

__all__: tuple[str, ...] = ("BIMODALITY_THRESHOLD", "ExposureReport", "bimodality_coefficient", "exposure_histogram")

BIMODALITY_THRESHOLD: float = 0.555


class ExposureReport(NamedTuple):
    """
    Luminance histogram of one image.

    :param histogram: Pixel count per bin.
    :param edges: Bin edges over [0, 1].
    :param coefficient: Bimodality coefficient, 0 for constant images.
    :param bimodal: True when the coefficient passes the threshold and two separated peaks exist.
    :param modes: Bin centers of the two main peaks when bimodal, otherwise of the highest bin.
    """

    histogram: NDArray[np.int64]
    edges: NDArray[np.float64]
    coefficient: float
    bimodal: bool
    modes: tuple[float, ...]


def bimodality_coefficient(values: NDArray[np.float64]) -> float:
    """
    Returns (skewness^2 + 1) / kurtosis with the non-excess kurtosis.

    :param values: Samples.
    :return: Coefficient, 0 when the samples are constant.
    """
    data: NDArray[np.float64] = np.asarray(values, dtype=np.float64).ravel()
    if data.size < 2 or np.ptp(data) == 0.0:
        return 0.0
    return float((skew(data) ** 2 + 1.0) / kurtosis(data, fisher=False))


def exposure_histogram(image: NDArray[np.float64], n_bins: int = 64) -> ExposureReport:
    """
    Builds the luminance histogram and tests it for the lit/shadow split of direct light.

    :param image: Linear image (H, W, 3) or (H, W).
    :param n_bins: Bin count, at least 16.
    :return: ExposureReport.
    :raises InputError: if n_bins < 16.
    """
    if n_bins < 16:
        raise InputError(f"n_bins must be at least 16, got {n_bins}")
    lum: NDArray[np.float64] = np.clip(luminance(image), 0.0, 1.0).ravel()
    counts, edges = np.histogram(lum, bins=n_bins, range=(0.0, 1.0))
    centers: NDArray[np.float64] = 0.5 * (edges[:-1] + edges[1:])
    coefficient: float = bimodality_coefficient(lum)
    # Zero padding lets the first and last bins count as peaks.
    peaks, _ = find_peaks(np.concatenate(([0], counts, [0])))
    peaks = peaks - 1
    two_peaks: bool = len(peaks) >= 2 and int(peaks[-1]) - int(peaks[0]) >= n_bins / 4
    bimodal: bool = coefficient > BIMODALITY_THRESHOLD and two_peaks
    modes: tuple[float, ...]
    if bimodal:
        # Highest peak on each side of the widest gap between neighbouring peaks.
        split: int = int(np.argmax(np.diff(peaks))) + 1
        low: NDArray[np.int64] = peaks[:split]
        high: NDArray[np.int64] = peaks[split:]
        picked: tuple[int, int] = (int(low[np.argmax(counts[low])]), int(high[np.argmax(counts[high])]))
        modes = tuple(float(centers[i]) for i in picked)
    else:
        modes = (float(centers[int(np.argmax(counts))]),)
    return ExposureReport(
        histogram=counts.astype(np.int64), edges=edges, coefficient=coefficient, bimodal=bimodal, modes=modes
    )
