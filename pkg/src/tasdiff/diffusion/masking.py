"""Frame-level condition masks applied to encoder features during training."""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..autodiff import SeqTensor
from ..config.schema import MaskKind
from ..evaluation.metrics import segments_from_labels
from ..models.layers import mask_frames
from .schedule import DiffusionError


@dataclass(frozen=True)
class ConditionMask:
    kind: MaskKind
    values: np.ndarray  # [L x 1] of 0/1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1, 1)
        if not np.isin(values, (0.0, 1.0)).all():
            raise DiffusionError("Condition mask values must be 0 or 1")
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def masked_frames(self) -> np.ndarray:
        return np.flatnonzero(self.values[:, 0] == 0.0)


def _label_ids(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim == 2:
        labels = labels.argmax(axis=1)
    if labels.ndim != 1 or labels.size == 0:
        raise DiffusionError("Cannot build a condition mask for an empty label sequence")
    return labels


def boundary_mask(labels: np.ndarray, radius: int) -> np.ndarray:
    """Zero every frame within ``radius`` of a label change.

    The change between frames ``i`` and ``i + 1`` masks frames ``i - radius + 1 .. i + radius``.
    """
    labels = _label_ids(labels)
    values = np.ones(labels.size)
    for i in np.flatnonzero(labels[1:] != labels[:-1]):
        values[max(0, i - radius + 1):min(labels.size, i + radius + 1)] = 0.0
    return values


def relation_mask(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Zero one whole action segment chosen uniformly."""
    labels = _label_ids(labels)
    segments = segments_from_labels(labels)
    chosen = segments[int(rng.integers(len(segments)))]
    values = np.ones(labels.size)
    values[chosen.start:chosen.end] = 0.0
    return values


def sample_mask(
    labels: np.ndarray,
    kind: Optional[Union[MaskKind, str]] = None,
    rng: Optional[np.random.Generator] = None,
    radius: int = 4,
    kinds: Optional[Sequence[MaskKind]] = None,
) -> ConditionMask:
    """Build a mask of ``kind``, or of a kind drawn uniformly from ``kinds`` when none is given."""
    labels = _label_ids(labels)
    if kind is None:
        if rng is None:
            raise DiffusionError("sample_mask needs either a kind or an rng")
        pool = list(kinds) if kinds else list(MaskKind)
        kind = pool[int(rng.integers(len(pool)))]
    kind = MaskKind(kind)
    length = labels.size

    if kind is MaskKind.ONES:
        values = np.ones(length)
    elif kind is MaskKind.ZEROS:
        values = np.zeros(length)
    elif kind is MaskKind.BOUNDARY:
        values = boundary_mask(labels, radius)
    else:
        values = relation_mask(labels, rng if rng is not None else np.random.default_rng(0))

    return ConditionMask(kind=kind, values=values)


def apply_mask(features: SeqTensor, mask: Union[ConditionMask, np.ndarray]) -> SeqTensor:
    """Multiply every frame of ``features`` by its 0/1 mask value."""
    return mask_frames(features, mask.values if isinstance(mask, ConditionMask) else mask)
