"""Segmentation metrics."""

from .metrics import (
    METRIC_COLUMNS,
    OVERLAPS,
    MetricBundle,
    MetricsError,
    Segment,
    edit_score,
    f1_at_k,
    f1_from_counts,
    f1_from_segments,
    frame_accuracy,
    labels_from_segments,
    levenshtein,
    match_segments,
    mean_bundle,
    report,
    segments_from_labels,
)

__all__ = [
    "METRIC_COLUMNS",
    "OVERLAPS",
    "MetricBundle",
    "MetricsError",
    "Segment",
    "edit_score",
    "f1_at_k",
    "f1_from_counts",
    "f1_from_segments",
    "frame_accuracy",
    "labels_from_segments",
    "levenshtein",
    "match_segments",
    "mean_bundle",
    "report",
    "segments_from_labels",
]
