"""Video records, feature sequences and class mappings."""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np


class DatasetError(Exception):
    """Raised for inconsistent videos, labels, mappings or manifests."""
    pass


@dataclass(frozen=True)
class FeatureSequence:
    """``[L x D]`` frame features stored as 32-bit floats."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise DatasetError(f"Features must be [L x D], got shape {values.shape}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DatasetError(f"Features need L >= 1 and D >= 1, got shape {values.shape}")
        values = values.astype(np.float32, copy=False)
        if not np.isfinite(values).all():
            raise DatasetError("Features contain NaN or Inf values")
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class VideoRecord:
    video_id: str
    features: FeatureSequence
    labels: List[str]
    split: str = "train"

    def __post_init__(self):
        if not self.video_id:
            raise DatasetError("Video id must not be empty")
        if not isinstance(self.features, FeatureSequence):
            self.features = FeatureSequence(self.features)
        self.labels = list(self.labels)
        if len(self.labels) != self.features.length:
            raise DatasetError(
                f"Video {self.video_id}: {len(self.labels)} labels for {self.features.length} frames"
            )

    @property
    def length(self) -> int:
        return self.features.length

    def label_ids(self, mapping: "ClassMapping") -> np.ndarray:
        return mapping.encode(self.labels)


@dataclass(frozen=True)
class ClassMapping:
    """Class names ordered by integer id."""

    names: Tuple[str, ...]
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = tuple(self.names)
        if len(names) < 2:
            raise DatasetError(f"A class mapping needs at least two classes, got {len(names)}")
        if len(set(names)) != len(names):
            raise DatasetError("Class names must be unique")
        for name in names:
            if not name or any(ch.isspace() for ch in name):
                raise DatasetError(f"Invalid class name {name!r}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(names)})

    @classmethod
    def from_labels(cls, label_sequences: Iterable[Sequence[str]]) -> "ClassMapping":
        """Ids in order of first appearance."""
        seen: Dict[str, None] = {}
        for labels in label_sequences:
            for name in labels:
                seen.setdefault(name, None)
        return cls(tuple(seen))

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise DatasetError(f"Unknown class name {name!r}")

    def name_of(self, class_id: int) -> str:
        if not 0 <= class_id < len(self.names):
            raise DatasetError(f"Class id {class_id} outside [0, {len(self.names)})")
        return self.names[class_id]

    def encode(self, labels: Sequence[str]) -> np.ndarray:
        return np.array([self.id_of(name) for name in labels], dtype=np.int64)

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.name_of(int(i)) for i in ids]


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    feature_path: str
    label_path: str
    split: str = "train"

    def to_dict(self) -> dict:
        return {
            "id": self.video_id,
            "feature_path": self.feature_path,
            "label_path": self.label_path,
            "split": self.split,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ManifestEntry":
        missing = [key for key in ("id", "feature_path", "label_path") if key not in data]
        if missing:
            raise DatasetError(f"Manifest entry is missing {missing}: {data}")
        return cls(
            video_id=str(data["id"]),
            feature_path=str(data["feature_path"]),
            label_path=str(data["label_path"]),
            split=str(data.get("split", "train")),
        )
