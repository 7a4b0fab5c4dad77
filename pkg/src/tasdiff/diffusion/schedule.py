"""Noise schedule, label embedding and forward corruption."""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..autodiff import SeqTensor
from ..utils.logging import get_logger


logger = get_logger(__name__)


class DiffusionError(Exception):
    """Raised for invalid schedules, step indices or label inputs."""
    pass


@dataclass(frozen=True)
class DiffusionSchedule:
    """Cumulative signal coefficients ``alpha_bar[0..S]``."""

    steps: int
    alpha_bar: np.ndarray

    def __post_init__(self):
        alpha_bar = np.asarray(self.alpha_bar, dtype=np.float64)
        if alpha_bar.shape != (self.steps + 1,):
            raise DiffusionError(f"alpha_bar needs {self.steps + 1} entries, got {alpha_bar.shape}")
        if alpha_bar[0] != 1.0:
            raise DiffusionError(f"alpha_bar[0] must be 1, got {alpha_bar[0]}")
        if not np.all(np.diff(alpha_bar) < 0):
            raise DiffusionError("alpha_bar must be strictly decreasing")
        if alpha_bar[-1] <= 0:
            raise DiffusionError("alpha_bar must stay positive")
        object.__setattr__(self, "alpha_bar", alpha_bar)

    def at(self, step: int) -> float:
        self.check_step(step, allow_zero=True)
        return float(self.alpha_bar[step])

    def check_step(self, step: int, allow_zero: bool = False) -> None:
        low = 0 if allow_zero else 1
        if not low <= step <= self.steps:
            raise DiffusionError(f"Diffusion step {step} outside [{low}, {self.steps}]")


def make_schedule(steps: int, offset: float = 0.008) -> DiffusionSchedule:
    """Cosine schedule ``alpha_bar[s] = f(s) / f(0)``."""
    if steps < 2:
        raise DiffusionError(f"A schedule needs at least 2 steps, got {steps}")
    s = np.arange(steps + 1, dtype=np.float64)
    f = np.cos(((s / steps + offset) / (1.0 + offset)) * math.pi / 2.0) ** 2
    alpha_bar = f / f[0]
    alpha_bar[0] = 1.0

    if not 0.0 < alpha_bar[-1] < 0.01:
        raise DiffusionError(f"Final alpha_bar {alpha_bar[-1]} outside (0, 0.01)")
    logger.debug("Built cosine schedule", steps=steps, final_alpha_bar=float(alpha_bar[-1]))
    return DiffusionSchedule(steps=steps, alpha_bar=alpha_bar)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise DiffusionError(f"Expected a non-empty 1-D label sequence, got shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise DiffusionError(f"Label ids must lie in [0, {num_classes}), got [{labels.min()}, {labels.max()}]")
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


@dataclass(frozen=True)
class LabelCodec:
    """Affine map between {0,1} (or probabilities) and ``[-scale, +scale]``."""

    scale: float = 1.0

    def __post_init__(self):
        if self.scale <= 0:
            raise DiffusionError(f"Label scale must be positive, got {self.scale}")

    def encode(self, values: np.ndarray) -> np.ndarray:
        return (2.0 * np.asarray(values, dtype=np.float64) - 1.0) * self.scale

    def decode(self, latent: np.ndarray) -> np.ndarray:
        return np.clip((np.asarray(latent, dtype=np.float64) / self.scale + 1.0) / 2.0, 0.0, 1.0)

    def decode_labels(self, latent: np.ndarray) -> np.ndarray:
        return self.decode(latent).argmax(axis=-1)


def corrupt(
    encoded: Union[np.ndarray, SeqTensor],
    step: int,
    schedule: DiffusionSchedule,
    noise: np.ndarray,
) -> np.ndarray:
    """``Y_s = sqrt(a_s) * Y_0 + sqrt(1 - a_s) * eps``."""
    schedule.check_step(step)
    encoded = encoded.data if isinstance(encoded, SeqTensor) else np.asarray(encoded, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != encoded.shape:
        raise DiffusionError(f"Noise shape {noise.shape} does not match labels {encoded.shape}")
    alpha_bar = schedule.alpha_bar[step]
    return math.sqrt(alpha_bar) * encoded + math.sqrt(1.0 - alpha_bar) * noise
