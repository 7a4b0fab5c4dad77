"""Interleaved sub-sequence augmentation, recombination and median filtering."""

from typing import Callable, List, Sequence

import numpy as np
from scipy.ndimage import median_filter

from .models import DatasetError


def augment_subsample(values: np.ndarray, rate: int = 4) -> List[np.ndarray]:
    """Split frames into ``rate`` residue classes: sub ``o`` holds frames ``o, o + R, o + 2R, ...``."""
    if rate < 1:
        raise DatasetError(f"Sub-sampling rate must be >= 1, got {rate}")
    values = np.asarray(values)
    return [values[offset::rate] for offset in range(rate)]


def recombine(subs: Sequence[np.ndarray], length: int, rate: int = 4) -> np.ndarray:
    """Inverse of :func:`augment_subsample`: ``out[t] = subs[t % R][t // R]``."""
    if len(subs) != rate:
        raise DatasetError(f"Expected {rate} sub-sequences, got {len(subs)}")
    subs = [np.asarray(sub) for sub in subs]
    for offset, sub in enumerate(subs):
        expected = len(range(offset, length, rate))
        if sub.shape[0] != expected:
            raise DatasetError(f"Sub-sequence {offset} has {sub.shape[0]} frames, expected {expected}")
    template = next((sub for sub in subs if sub.size), None)
    if template is None:
        raise DatasetError("Cannot recombine an empty sequence")
    out = np.empty((length,) + template.shape[1:], dtype=template.dtype)
    for offset, sub in enumerate(subs):
        out[offset::rate] = sub
    return out


def median_filter_labels(labels: np.ndarray, window: int = 9) -> np.ndarray:
    """Sliding median over class ids with edge replication."""
    if window < 1 or window % 2 == 0:
        raise DatasetError(f"Median window must be an odd positive integer, got {window}")
    labels = np.asarray(labels)
    if window == 1 or labels.size == 0:
        return labels.copy()
    return median_filter(labels, size=window, mode="nearest")


def predict_with_augmentation(
    predict: Callable[[np.ndarray], np.ndarray],
    features: np.ndarray,
    rate: int = 4,
    median_window: int = 9,
) -> np.ndarray:
    """Predict each sub-sequence separately, recombine the class ids, then median filter."""
    features = np.asarray(features)
    length = features.shape[0]
    predictions = [
        np.asarray(predict(sub), dtype=np.int64) if sub.shape[0] else np.empty(0, dtype=np.int64)
        for sub in augment_subsample(features, rate)
    ]
    return median_filter_labels(recombine(predictions, length, rate), median_window)
