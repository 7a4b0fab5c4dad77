"""Checkpoints, artifacts, per-video inference, benchmarking and the command pipeline."""

from .checkpoint import (
    Checkpoint,
    CheckpointError,
    load_checkpoint,
    save_checkpoint,
)

from .artifacts import (
    class_colors,
    read_csv,
    render_timeline_svg,
    write_csv,
)

from .inference import (
    TRAJECTORY_CSV_COLUMNS,
    VideoPrediction,
    VideoPredictor,
)

from .bench import (
    BENCH_COLUMNS,
    SUMMARY_COLUMNS,
    Benchmark,
    BenchReport,
    BenchRow,
)

from .pipeline import (
    METRICS_CSV_COLUMNS,
    BenchResult,
    EvalResult,
    GenDataResult,
    InferResult,
    SegmentationPipeline,
    TrainResult,
)

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "load_checkpoint",
    "save_checkpoint",

    "class_colors",
    "read_csv",
    "render_timeline_svg",
    "write_csv",

    "TRAJECTORY_CSV_COLUMNS",
    "VideoPrediction",
    "VideoPredictor",

    "BENCH_COLUMNS",
    "SUMMARY_COLUMNS",
    "Benchmark",
    "BenchReport",
    "BenchRow",

    "METRICS_CSV_COLUMNS",
    "BenchResult",
    "EvalResult",
    "GenDataResult",
    "InferResult",
    "SegmentationPipeline",
    "TrainResult",
]
