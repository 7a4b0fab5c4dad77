"""On-disk formats: binary feature files, label text files, mapping.txt and the manifest."""

import json
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.logging import get_logger
from .models import ClassMapping, DatasetError, FeatureSequence, ManifestEntry, VideoRecord


logger = get_logger(__name__)

FEATURE_MAGIC = b"EDAF"
FEATURE_VERSION = 1
FEATURE_HEADER = np.dtype([("magic", "S4"), ("version", "<u2"), ("length", "<u4"), ("dim", "<u4")])
FEATURE_SUFFIX = ".feat"
MANIFEST_NAME = "manifest.json"
MAPPING_NAME = "mapping.txt"

PathLike = Union[str, Path]


def video_file_name(video_id: str, suffix: str) -> str:
    """File name for ``video_id``; directory parts of the id are dropped."""
    name = Path(video_id).name
    if name in ("", ".", ".."):
        raise DatasetError(f"Video id {video_id!r} cannot name a file")
    return name + suffix


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise DatasetError(f"{path} is not valid UTF-8: {e}")


class FeatureFormatError(DatasetError):
    """Raised when a feature file cannot be parsed; ``offset`` is the failing byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def encode_features(values: np.ndarray) -> bytes:
    features = FeatureSequence(values)
    header = np.zeros(1, dtype=FEATURE_HEADER)
    header["magic"] = FEATURE_MAGIC
    header["version"] = FEATURE_VERSION
    header["length"] = features.length
    header["dim"] = features.dim
    return header.tobytes() + features.values.astype("<f4").tobytes()


def decode_features(blob: bytes) -> np.ndarray:
    """Parse a feature file, checking every header field and the payload size."""
    header_size = FEATURE_HEADER.itemsize
    if len(blob) < header_size:
        raise FeatureFormatError(f"Truncated header: {len(blob)} of {header_size} bytes", offset=len(blob))

    header = np.frombuffer(blob, dtype=FEATURE_HEADER, count=1)[0]
    if blob[:4] != FEATURE_MAGIC:
        raise FeatureFormatError(f"Bad magic {blob[:4]!r}", offset=0)
    if int(header["version"]) != FEATURE_VERSION:
        raise FeatureFormatError(f"Unsupported version {int(header['version'])}", offset=4)
    length, dim = int(header["length"]), int(header["dim"])
    if length == 0:
        raise FeatureFormatError("Frame count is zero", offset=6)
    if dim == 0:
        raise FeatureFormatError("Feature dimension is zero", offset=10)

    expected = header_size + 4 * length * dim
    if len(blob) < expected:
        raise FeatureFormatError(f"Truncated payload: {len(blob)} of {expected} bytes", offset=len(blob))
    if len(blob) > expected:
        raise FeatureFormatError(f"{len(blob) - expected} trailing bytes", offset=expected)

    values = np.frombuffer(blob, dtype="<f4", count=length * dim, offset=header_size).reshape(length, dim)
    finite = np.isfinite(values).ravel()
    if not finite.all():
        first_bad = int(np.argmin(finite))
        raise FeatureFormatError("Non-finite feature value", offset=header_size + 4 * first_bad)
    return values.astype(np.float32)


def write_features(path: PathLike, values: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_features(values))


def read_features(path: PathLike) -> FeatureSequence:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Feature file not found: {path}")
    return FeatureSequence(decode_features(path.read_bytes()))


def write_labels(path: PathLike, labels: Sequence[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{name}\n" for name in labels), encoding="utf-8")


def read_labels(path: PathLike, expected_length: Optional[int] = None) -> List[str]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Label file not found: {path}")
    labels = _read_text(path).splitlines()
    for line_number, name in enumerate(labels, start=1):
        if not name.strip():
            raise DatasetError(f"{path}: blank label on line {line_number}")
    labels = [name.strip() for name in labels]
    if expected_length is not None and len(labels) != expected_length:
        raise DatasetError(f"{path}: {len(labels)} labels but the feature file has {expected_length} frames")
    return labels


def write_mapping(path: PathLike, mapping: ClassMapping) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{i} {name}\n" for i, name in enumerate(mapping.names)), encoding="utf-8")


def read_mapping(path: PathLike) -> ClassMapping:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Mapping file not found: {path}")
    entries = []
    for line_number, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2 or not parts[0].lstrip("-").isdigit():
            raise DatasetError(f"{path}:{line_number}: expected '<id> <name>', got {line!r}")
        entries.append((int(parts[0]), parts[1]))
    entries.sort()
    ids = [i for i, _ in entries]
    if ids != list(range(len(entries))):
        raise DatasetError(f"{path}: class ids must be 0..{len(entries) - 1} without gaps, got {ids}")
    return ClassMapping(tuple(name for _, name in entries))


def write_manifest(path: PathLike, entries: Sequence[ManifestEntry]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump([entry.to_dict() for entry in entries], f, indent=2)


def read_manifest(path: PathLike) -> List[ManifestEntry]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"Manifest not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise DatasetError(f"Invalid manifest JSON in {path}: {e}")
    if not isinstance(data, list):
        raise DatasetError(f"Manifest {path} must be a JSON array")
    entries = [ManifestEntry.from_dict(item) for item in data]
    ids = [entry.video_id for entry in entries]
    if len(set(ids)) != len(ids):
        raise DatasetError(f"Manifest {path} lists duplicate video ids")
    names = [video_file_name(video_id, "") for video_id in ids]
    if len(set(names)) != len(names):
        raise DatasetError(f"Manifest {path} lists video ids that share a file name")
    return entries


def save_video(video: VideoRecord, root: PathLike) -> ManifestEntry:
    """Write one video's feature and label files below ``root``; paths are root-relative."""
    root = Path(root)
    entry = ManifestEntry(
        video_id=video.video_id,
        feature_path=f"features/{video_file_name(video.video_id, FEATURE_SUFFIX)}",
        label_path=f"labels/{video_file_name(video.video_id, '.txt')}",
        split=video.split,
    )
    write_features(root / entry.feature_path, video.features.values)
    write_labels(root / entry.label_path, video.labels)
    return entry


def load_video(entry: ManifestEntry, root: PathLike) -> VideoRecord:
    root = Path(root)
    features = read_features(root / entry.feature_path)
    labels = read_labels(root / entry.label_path, expected_length=features.length)
    return VideoRecord(video_id=entry.video_id, features=features, labels=labels, split=entry.split)


def save_dataset(videos: Sequence[VideoRecord], mapping: ClassMapping, root: PathLike) -> Path:
    """Write every video plus ``mapping.txt`` and ``manifest.json``; returns the manifest path."""
    root = Path(root)
    entries = [save_video(video, root) for video in videos]
    write_mapping(root / MAPPING_NAME, mapping)
    manifest_path = root / MANIFEST_NAME
    write_manifest(manifest_path, entries)
    logger.info("Dataset written", root=str(root), videos=len(entries))
    return manifest_path


def load_dataset(root: PathLike, split: Optional[str] = None) -> Tuple[List[VideoRecord], ClassMapping]:
    """Load the manifest's videos (optionally one split) and validate labels against the mapping."""
    root = Path(root)
    mapping = read_mapping(root / MAPPING_NAME)
    entries = read_manifest(root / MANIFEST_NAME)
    videos = [load_video(entry, root) for entry in entries if split is None or entry.split == split]
    for video in videos:
        video.label_ids(mapping)
    logger.info("Dataset loaded", root=str(root), videos=len(videos), split=split or "all")
    return videos, mapping
