"""Cross-entropy, smoothness and boundary losses over predicted class probabilities."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import convolve1d

from .. import autodiff as ad
from ..autodiff import SeqTensor
from ..config.schema import LossConfig
from .schedule import DiffusionError


PROB_FLOOR = 1e-7


def boundary_sequence(labels: np.ndarray) -> np.ndarray:
    """``B[i] = 1`` where frame ``i`` and frame ``i + 1`` carry different labels.

    Accepts class ids ``[L]`` or one-hot rows ``[L x C]``.
    """
    labels = np.asarray(labels)
    if labels.ndim == 2:
        labels = labels.argmax(axis=1)
    if labels.ndim != 1 or labels.size == 0:
        raise DiffusionError(f"Expected a non-empty label sequence, got shape {labels.shape}")
    return (labels[1:] != labels[:-1]).astype(np.float64)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Peak-normalized Gaussian with support ``ceil(4 sigma)`` on each side."""
    radius = int(math.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    return np.exp(-0.5 * (x / sigma) ** 2)


def smooth_boundaries(boundaries: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    boundaries = np.asarray(boundaries, dtype=np.float64)
    if sigma < 0:
        raise DiffusionError(f"Boundary smoothing sigma must be >= 0, got {sigma}")
    if sigma == 0 or boundaries.size == 0:
        return boundaries.copy()
    smoothed = convolve1d(boundaries, gaussian_kernel(sigma), mode="constant", cval=0.0)
    return np.clip(smoothed, 0.0, 1.0)


def _require_probs(probs: SeqTensor, name: str) -> None:
    if probs.ndim != 2 or probs.shape[0] < 1:
        raise DiffusionError(f"{name} expects probabilities of shape [L x C], got {probs.shape}")


def loss_ce(probs: SeqTensor, targets: np.ndarray, floor: float = PROB_FLOOR) -> SeqTensor:
    """``-(1 / LC) * sum Y0 * log P``."""
    _require_probs(probs, "loss_ce")
    targets = np.asarray(targets, dtype=probs.dtype)
    if targets.shape != probs.shape:
        raise DiffusionError(f"loss_ce: targets {targets.shape} do not match probabilities {probs.shape}")
    length, classes = probs.shape
    log_probs = ad.log(ad.clamp(probs, floor, 1.0))
    return ad.scale(ad.sum_all(ad.mul(log_probs, targets)), -1.0 / (length * classes))


def loss_smooth(probs: SeqTensor, clamp_at: Optional[float] = None, floor: float = PROB_FLOOR) -> SeqTensor:
    """Mean squared difference of log-probabilities between adjacent frames."""
    _require_probs(probs, "loss_smooth")
    length, classes = probs.shape
    if length < 2:
        return SeqTensor(0.0, dtype=probs.dtype)
    log_probs = ad.log(ad.clamp(probs, floor, 1.0))
    squared = ad.square(ad.sub(ad.slice_time(log_probs, 1, length), ad.slice_time(log_probs, 0, length - 1)))
    if clamp_at is not None:
        squared = ad.clamp(squared, high=clamp_at)
    return ad.scale(ad.sum_all(squared), 1.0 / ((length - 1) * classes))


def loss_boundary(probs: SeqTensor, targets: np.ndarray, floor: float = PROB_FLOOR) -> SeqTensor:
    """Binary cross-entropy between ``1 - P_i . P_{i+1}`` and the smoothed boundary targets."""
    _require_probs(probs, "loss_boundary")
    length = probs.shape[0]
    if length < 2:
        raise DiffusionError("loss_boundary needs at least two frames")
    targets = np.asarray(targets, dtype=probs.dtype).reshape(-1, 1)
    if targets.shape[0] != length - 1:
        raise DiffusionError(f"loss_boundary: {targets.shape[0]} targets for {length} frames")

    same = ad.sum_channels(ad.mul(ad.slice_time(probs, 0, length - 1), ad.slice_time(probs, 1, length)))
    same = ad.clamp(same, floor, 1.0 - floor)
    changed = ad.add_scalar(ad.scale(same, -1.0), 1.0)
    log_likelihood = ad.add(ad.mul(ad.log(changed), targets), ad.mul(ad.log(same), 1.0 - targets))
    return ad.scale(ad.sum_all(log_likelihood), -1.0 / (length - 1))


@dataclass
class LossTerms:
    total: SeqTensor
    ce: SeqTensor
    smooth: SeqTensor
    boundary: SeqTensor

    def values(self) -> dict:
        return {
            "loss": self.total.item(),
            "ce": self.ce.item(),
            "smooth": self.smooth.item(),
            "boundary": self.boundary.item(),
        }


def loss_terms(
    probs: SeqTensor,
    targets: np.ndarray,
    boundary_targets: Optional[np.ndarray] = None,
    config: Optional[LossConfig] = None,
) -> LossTerms:
    """All three losses and their unit-weight sum.

    ``boundary_targets`` defaults to the smoothed boundaries of ``targets``. A single-frame
    sequence has no boundary term.
    """
    config = config or LossConfig()
    ce = loss_ce(probs, targets, config.prob_floor)
    smooth = loss_smooth(probs, config.smooth_clamp, config.prob_floor)
    if probs.shape[0] < 2:
        boundary = SeqTensor(0.0, dtype=probs.dtype)
    else:
        if boundary_targets is None:
            boundary_targets = smooth_boundaries(boundary_sequence(targets), config.boundary_sigma)
        boundary = loss_boundary(probs, boundary_targets, config.prob_floor)
    total = ad.add(ad.add(ce, smooth), boundary)
    return LossTerms(total=total, ce=ce, smooth=smooth, boundary=boundary)


def loss_total(
    probs: SeqTensor,
    targets: np.ndarray,
    boundary_targets: np.ndarray,
    config: Optional[LossConfig] = None,
) -> SeqTensor:
    return loss_terms(probs, targets, boundary_targets, config).total
