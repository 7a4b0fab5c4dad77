"""Frame accuracy, segmental edit score and F1@k over per-frame class ids."""

from dataclasses import asdict, dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np


OVERLAPS = (0.10, 0.25, 0.50)


class MetricsError(ValueError):
    """Raised for empty or mismatched label sequences."""
    pass


@dataclass(frozen=True)
class Segment:
    label: int
    start: int
    end: int  # exclusive

    def __post_init__(self):
        if self.start >= self.end:
            raise MetricsError(f"Segment start {self.start} must precede end {self.end}")

    @property
    def length(self) -> int:
        return self.end - self.start


def _as_labels(labels: Sequence[int], name: str) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise MetricsError(f"{name} must be a 1-D label sequence, got shape {labels.shape}")
    if labels.size == 0:
        raise MetricsError(f"{name} is empty")
    return labels


def segments_from_labels(labels: Sequence[int]) -> List[Segment]:
    """Maximal runs of equal labels, in order."""
    labels = _as_labels(labels, "labels")
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [labels.size]])
    return [Segment(int(labels[s]), int(s), int(e)) for s, e in zip(starts, ends)]


def labels_from_segments(segments: Sequence[Segment]) -> np.ndarray:
    return np.concatenate([np.full(seg.length, seg.label) for seg in segments])


def _check_pair(pred: Sequence[int], gt: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    pred = _as_labels(pred, "prediction")
    gt = _as_labels(gt, "ground truth")
    if pred.shape != gt.shape:
        raise MetricsError(f"Prediction has {pred.size} frames but ground truth has {gt.size}")
    return pred, gt


def frame_accuracy(pred: Sequence[int], gt: Sequence[int]) -> float:
    pred, gt = _check_pair(pred, gt)
    return 100.0 * float(np.count_nonzero(pred == gt)) / gt.size


def levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    """Unit-cost insert/delete/substitute distance."""
    rows, cols = len(a), len(b)
    table = np.zeros((rows + 1, cols + 1), dtype=np.int64)
    table[:, 0] = np.arange(rows + 1)
    table[0, :] = np.arange(cols + 1)
    for i in range(1, rows + 1):
        for j in range(1, cols + 1):
            if a[i - 1] == b[j - 1]:
                table[i, j] = table[i - 1, j - 1]
            else:
                table[i, j] = 1 + min(table[i - 1, j], table[i, j - 1], table[i - 1, j - 1])
    return int(table[rows, cols])


def edit_score(pred: Sequence[int], gt: Sequence[int]) -> float:
    pred_labels = [seg.label for seg in segments_from_labels(_as_labels(pred, "prediction"))]
    gt_labels = [seg.label for seg in segments_from_labels(_as_labels(gt, "ground truth"))]
    distance = levenshtein(pred_labels, gt_labels)
    return 100.0 * (1.0 - distance / max(len(pred_labels), len(gt_labels)))


def match_segments(pred_segments: Sequence[Segment], gt_segments: Sequence[Segment], overlap: float) -> Tuple[int, int, int]:
    """Greedy matching in prediction order; each ground-truth segment is consumed once.

    Returns ``(tp, fp, fn)``.
    """
    hits = np.zeros(len(gt_segments), dtype=bool)
    gt_labels = np.array([seg.label for seg in gt_segments])
    gt_starts = np.array([seg.start for seg in gt_segments])
    gt_ends = np.array([seg.end for seg in gt_segments])
    tp = fp = 0

    for seg in pred_segments:
        intersection = np.minimum(seg.end, gt_ends) - np.maximum(seg.start, gt_starts)
        union = np.maximum(seg.end, gt_ends) - np.minimum(seg.start, gt_starts)
        iou = np.where(gt_labels == seg.label, intersection / union, 0.0)
        best = int(iou.argmax())
        if iou[best] >= overlap and not hits[best]:
            tp += 1
            hits[best] = True
        else:
            fp += 1

    return tp, fp, int(len(gt_segments) - hits.sum())


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 200.0 * precision * recall / (precision + recall)


def f1_from_segments(pred_segments: Sequence[Segment], gt_segments: Sequence[Segment], overlap: float) -> float:
    return f1_from_counts(*match_segments(pred_segments, gt_segments, overlap))


def f1_at_k(pred: Sequence[int], gt: Sequence[int], overlap: float) -> float:
    if not 0.0 < overlap <= 1.0:
        raise MetricsError(f"Overlap threshold must lie in (0, 1], got {overlap}")
    return f1_from_segments(
        segments_from_labels(_as_labels(pred, "prediction")),
        segments_from_labels(_as_labels(gt, "ground truth")),
        overlap,
    )


@dataclass(frozen=True)
class MetricBundle:
    f1_10: float
    f1_25: float
    f1_50: float
    edit: float
    acc: float

    @property
    def avg(self) -> float:
        return (self.f1_10 + self.f1_25 + self.f1_50 + self.edit + self.acc) / 5.0

    def as_dict(self) -> Dict[str, float]:
        row = {key.upper() if key.startswith("f1") else key: value for key, value in asdict(self).items()}
        row["avg"] = self.avg
        return row


METRIC_COLUMNS = ["F1_10", "F1_25", "F1_50", "edit", "acc", "avg"]


def report(pred: Sequence[int], gt: Sequence[int]) -> MetricBundle:
    pred, gt = _check_pair(pred, gt)
    f1_10, f1_25, f1_50 = (f1_at_k(pred, gt, overlap) for overlap in OVERLAPS)
    return MetricBundle(
        f1_10=f1_10,
        f1_25=f1_25,
        f1_50=f1_50,
        edit=edit_score(pred, gt),
        acc=frame_accuracy(pred, gt),
    )


def mean_bundle(bundles: Sequence[MetricBundle]) -> MetricBundle:
    if not bundles:
        raise MetricsError("Cannot average an empty list of metric bundles")
    return MetricBundle(
        f1_10=float(np.mean([b.f1_10 for b in bundles])),
        f1_25=float(np.mean([b.f1_25 for b in bundles])),
        f1_50=float(np.mean([b.f1_50 for b in bundles])),
        edit=float(np.mean([b.edit for b in bundles])),
        acc=float(np.mean([b.acc for b in bundles])),
    )
