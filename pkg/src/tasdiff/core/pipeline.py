"""Command orchestration: data generation, training, inference, evaluation and benchmarking."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..config.loader import ConfigLoader, ConfigurationError
from ..config.schema import RunConfig
from ..data.io import load_dataset, read_labels, save_dataset, video_file_name, write_labels
from ..data.models import ClassMapping, DatasetError, VideoRecord
from ..data.synthetic import SyntheticVideoGenerator
from ..diffusion.training import LOSS_LOG_COLUMNS, Trainer, TrainingError, TrainingExample
from ..evaluation.metrics import METRIC_COLUMNS, MetricBundle, mean_bundle, report
from ..models.segmenter import Segmenter
from ..utils.logging import get_logger, log_execution_time
from .artifacts import read_csv, render_timeline_svg, write_csv
from .bench import BENCH_COLUMNS, SUMMARY_COLUMNS, Benchmark, BenchReport
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .inference import TRAJECTORY_CSV_COLUMNS, Strategy, VideoPrediction, VideoPredictor


PathLike = Union[str, Path]

CHECKPOINT_NAME = "checkpoint.npz"
LOSS_LOG_NAME = "loss_log.csv"
PREDICTIONS_DIR = "predictions"
TIMELINES_DIR = "timelines"
TRAJECTORY_NAME = "trajectories.csv"
INFERENCE_SUMMARY_NAME = "inference_summary.csv"
METRICS_NAME = "metrics.csv"
BENCH_NAME = "bench.csv"
BENCH_SUMMARY_NAME = "bench_summary.csv"

INFERENCE_SUMMARY_COLUMNS = ["video_id", "strategy", "frames", "denoiser_calls", "wall_ms"]
METRICS_CSV_COLUMNS = ["video_id"] + METRIC_COLUMNS + ["denoiser_calls", "wall_ms", "error"]
MEAN_ROW_ID = "mean"

# Sections that fix the shape and meaning of trained parameters.
MODEL_SECTIONS = ("encoder", "decoder", "diffusion")


@dataclass
class GenDataResult:
    out_dir: Path
    manifest_path: Path
    videos: int
    files: List[Path] = field(default_factory=list)


@dataclass
class TrainResult:
    checkpoint_path: Path
    loss_log_path: Path
    start_step: int
    end_step: int
    initial_loss: float
    final_loss: float
    logged_rows: int


@dataclass
class InferResult:
    out_dir: Path
    predictions_dir: Path
    trajectory_path: Path
    summary_path: Path
    predictions: Dict[str, VideoPrediction] = field(default_factory=dict)
    svg_paths: List[Path] = field(default_factory=list)

    @property
    def denoiser_calls(self) -> int:
        return sum(p.denoiser_calls for p in self.predictions.values())


@dataclass
class EvalResult:
    metrics_path: Path
    bundles: Dict[str, MetricBundle] = field(default_factory=dict)
    errors: Dict[str, str] = field(default_factory=dict)
    mean: Optional[MetricBundle] = None


@dataclass
class BenchResult:
    comparison_path: Path
    summary_path: Path
    report: BenchReport


class SegmentationPipeline:
    """Runs each command of the segmentation workflow from one :class:`RunConfig`."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.logger = get_logger(self.__class__.__name__)

    def _select_videos(self, data_dir: PathLike, split: Optional[str]) -> Tuple[List[VideoRecord], ClassMapping]:
        """Videos of ``split``; the default ``eval`` falls back to every video when empty."""
        videos, mapping = load_dataset(data_dir)
        if split == "all":
            return videos, mapping
        wanted = split or "eval"
        selected = [video for video in videos if video.split == wanted]
        if not selected and split is None:
            self.logger.warning("No eval videos; using every video", data_dir=str(data_dir))
            return videos, mapping
        if not selected:
            raise DatasetError(f"No videos in split {wanted!r} under {data_dir}")
        return selected, mapping

    def _inference_config(self, checkpoint: Checkpoint) -> RunConfig:
        """Trained sections from the checkpoint, sampling sections from this run."""
        config = checkpoint.config.model_copy(update={
            "seed": self.config.seed,
            "sampler": self.config.sampler,
            "augmentation": self.config.augmentation,
            "bench": self.config.bench,
        })
        if config.sampler.total_steps != config.diffusion.steps:
            raise ConfigurationError(
                f"sampler.total_steps={config.sampler.total_steps} but the checkpoint was trained "
                f"with diffusion.steps={config.diffusion.steps}",
                fields=["sampler.total_steps"],
            )
        return config

    def _resume_config(self, checkpoint: Checkpoint) -> RunConfig:
        """This run's config with the model sections of the checkpoint being resumed."""
        data = self.config.model_dump(mode="json")
        data.update({name: getattr(checkpoint.config, name).model_dump(mode="json") for name in MODEL_SECTIONS})
        return ConfigLoader().load_from_dict(data)

    def _load_predictor(self, checkpoint_path: PathLike) -> Tuple[VideoPredictor, Checkpoint]:
        checkpoint = load_checkpoint(checkpoint_path)
        config = self._inference_config(checkpoint)
        model = checkpoint.build_model()
        if config.sampler.fp32:
            model.cast(np.float32)
        return VideoPredictor(model, config), checkpoint

    @log_execution_time
    def gen_data(self, out_dir: PathLike) -> GenDataResult:
        out_dir = Path(out_dir)
        generator = SyntheticVideoGenerator(self.config.dataset)
        videos = generator.generate()
        manifest_path = save_dataset(videos, generator.mapping, out_dir)
        files = sorted(path for path in out_dir.rglob("*") if path.is_file())
        self.logger.info("Synthetic dataset generated", out_dir=str(out_dir), videos=len(videos), files=len(files))
        return GenDataResult(out_dir=out_dir, manifest_path=manifest_path, videos=len(videos), files=files)

    @log_execution_time
    def train(
        self,
        data_dir: PathLike,
        out_dir: PathLike,
        resume: Optional[PathLike] = None,
        steps: Optional[int] = None,
        progress: bool = False,
    ) -> TrainResult:
        """Train on the ``train`` split, writing the checkpoint and ``loss_log.csv`` to ``out_dir``.

        A non-finite loss saves the last good parameters before the error propagates.
        """
        out_dir = Path(out_dir)
        videos, mapping = load_dataset(data_dir, split="train")
        if not videos:
            raise DatasetError(f"No training videos under {data_dir}")
        examples = [TrainingExample(v.video_id, v.features.values, v.label_ids(mapping)) for v in videos]

        config = self.config
        if resume is not None:
            checkpoint = load_checkpoint(resume)
            if checkpoint.mapping != mapping:
                raise DatasetError(f"Checkpoint classes {checkpoint.class_names} differ from the dataset mapping")
            config = self._resume_config(checkpoint)
            model = checkpoint.build_model()
            optimizer = checkpoint.build_optimizer(model, config.training)
            self.logger.info("Resuming training", checkpoint=str(resume), step=checkpoint.step)
        else:
            model = Segmenter(config, num_classes=len(mapping))
            optimizer = None

        start = optimizer.step_count if optimizer is not None else 0
        trainer = Trainer(model, config, optimizer, rng=np.random.default_rng([config.seed, 1, start]))
        checkpoint_path = out_dir / CHECKPOINT_NAME
        loss_log_path = out_dir / LOSS_LOG_NAME

        try:
            summary = trainer.train(
                examples,
                steps=steps,
                progress=progress,
                on_checkpoint=lambda _: save_checkpoint(checkpoint_path, model, mapping, trainer.optimizer, config),
            )
        except TrainingError as e:
            # The trainer has rolled back to the last parameters that gave a finite loss.
            save_checkpoint(checkpoint_path, model, mapping, trainer.optimizer, config)
            if e.summary is not None:
                write_csv(loss_log_path, (r.as_row() for r in e.summary.records), LOSS_LOG_COLUMNS)
            self.logger.error(
                "Training aborted; last good checkpoint kept",
                checkpoint=str(checkpoint_path),
                step=trainer.step_count,
            )
            raise

        save_checkpoint(checkpoint_path, model, mapping, trainer.optimizer, config)
        write_csv(loss_log_path, (r.as_row() for r in summary.records), LOSS_LOG_COLUMNS)
        return TrainResult(
            checkpoint_path=checkpoint_path,
            loss_log_path=loss_log_path,
            start_step=summary.start_step,
            end_step=summary.end_step,
            initial_loss=summary.initial_loss,
            final_loss=summary.final_loss,
            logged_rows=len(summary.records),
        )

    @log_execution_time
    def infer(
        self,
        checkpoint_path: PathLike,
        data_dir: PathLike,
        out_dir: PathLike,
        strategy: Strategy = "fixed",
        augment: Optional[bool] = None,
        svg: bool = False,
        split: Optional[str] = None,
    ) -> InferResult:
        out_dir = Path(out_dir)
        predictor, checkpoint = self._load_predictor(checkpoint_path)
        videos, mapping = self._select_videos(data_dir, split)
        if checkpoint.mapping != mapping:
            raise DatasetError(f"Checkpoint classes {checkpoint.class_names} differ from the dataset mapping")
        seed = predictor.config.seed

        def run(item: Tuple[int, VideoRecord]) -> VideoPrediction:
            index, video = item
            return predictor.predict(video.video_id, video.features.values, strategy, (seed, index), augment)

        with ThreadPoolExecutor(max_workers=predictor.config.bench.workers) as pool:
            predictions = list(pool.map(run, enumerate(videos)))

        result = InferResult(
            out_dir=out_dir,
            predictions_dir=out_dir / PREDICTIONS_DIR,
            trajectory_path=out_dir / TRAJECTORY_NAME,
            summary_path=out_dir / INFERENCE_SUMMARY_NAME,
        )
        summary_rows, trajectory_rows = [], []
        for video, prediction in zip(videos, predictions):
            result.predictions[video.video_id] = prediction
            label_path = result.predictions_dir / video_file_name(video.video_id, ".txt")
            write_labels(label_path, mapping.decode(prediction.labels))
            trajectory_rows.extend(prediction.trajectory_rows())
            summary_rows.append({
                "video_id": video.video_id,
                "strategy": strategy,
                "frames": video.length,
                "denoiser_calls": prediction.denoiser_calls,
                "wall_ms": prediction.wall_ms,
            })
            if svg:
                result.svg_paths.append(render_timeline_svg(
                    out_dir / TIMELINES_DIR / video_file_name(video.video_id, ".svg"),
                    video.label_ids(mapping),
                    prediction.labels,
                    mapping.names,
                    title=video.video_id,
                ))

        write_csv(result.trajectory_path, trajectory_rows, TRAJECTORY_CSV_COLUMNS)
        write_csv(result.summary_path, summary_rows, INFERENCE_SUMMARY_COLUMNS)
        self.logger.info(
            "Inference finished",
            videos=len(videos),
            strategy=strategy,
            denoiser_calls=result.denoiser_calls,
        )
        return result

    @log_execution_time
    def evaluate(
        self,
        pred_dir: PathLike,
        data_dir: PathLike,
        out_dir: Optional[PathLike] = None,
        split: Optional[str] = None,
    ) -> EvalResult:
        """Score ``<pred_dir>/predictions/<id>.txt`` (or ``<pred_dir>/<id>.txt``) against ground truth.

        Unreadable or missing predictions become error rows; the ``mean`` row averages the rest.
        """
        pred_dir = Path(pred_dir)
        labels_dir = pred_dir / PREDICTIONS_DIR if (pred_dir / PREDICTIONS_DIR).is_dir() else pred_dir
        out_dir = Path(out_dir) if out_dir is not None else pred_dir
        videos, mapping = self._select_videos(data_dir, split)

        costs: Dict[str, dict] = {}
        summary_path = pred_dir / INFERENCE_SUMMARY_NAME
        if summary_path.exists():
            costs = {str(row["video_id"]): row for row in read_csv(summary_path).to_dict("records")}

        result = EvalResult(metrics_path=out_dir / METRICS_NAME)
        rows = []
        for video in videos:
            cost = costs.get(video.video_id, {})
            row = {
                "video_id": video.video_id,
                "denoiser_calls": cost.get("denoiser_calls"),
                "wall_ms": cost.get("wall_ms"),
            }
            try:
                labels = read_labels(labels_dir / video_file_name(video.video_id, ".txt"), expected_length=video.length)
                predicted = mapping.encode(labels)
            except DatasetError as e:
                self.logger.error("Prediction unusable", video_id=video.video_id, error=str(e))
                result.errors[video.video_id] = str(e)
                rows.append({**row, "error": str(e)})
                continue
            bundle = report(predicted, video.label_ids(mapping))
            result.bundles[video.video_id] = bundle
            rows.append({**row, **bundle.as_dict(), "error": ""})

        if result.bundles:
            result.mean = mean_bundle(list(result.bundles.values()))
            scored = [row for row in rows if not row["error"]]
            calls = [row["denoiser_calls"] for row in scored if row["denoiser_calls"] is not None]
            walls = [row["wall_ms"] for row in scored if row["wall_ms"] is not None]
            rows.append({
                "video_id": MEAN_ROW_ID,
                **result.mean.as_dict(),
                "denoiser_calls": float(np.mean(calls)) if calls else None,
                "wall_ms": float(np.mean(walls)) if walls else None,
                "error": "",
            })

        write_csv(result.metrics_path, rows, METRICS_CSV_COLUMNS)
        self.logger.info(
            "Evaluation finished",
            videos=len(videos),
            errors=len(result.errors),
            avg=round(result.mean.avg, 3) if result.mean else None,
        )
        return result

    @log_execution_time
    def bench(
        self,
        checkpoint_path: PathLike,
        data_dir: PathLike,
        out_dir: PathLike,
        split: Optional[str] = None,
        augment: bool = False,
    ) -> BenchResult:
        """Compare strategies on whole videos unless ``augment`` asks for sub-sequence sampling."""
        out_dir = Path(out_dir)
        predictor, checkpoint = self._load_predictor(checkpoint_path)
        videos, mapping = self._select_videos(data_dir, split)
        if checkpoint.mapping != mapping:
            raise DatasetError(f"Checkpoint classes {checkpoint.class_names} differ from the dataset mapping")

        benchmark = Benchmark(predictor, predictor.config, augment=augment)
        bench_report = benchmark.run(videos, mapping, checkpoint_bytes=Path(checkpoint_path).stat().st_size)
        comparison_path = write_csv(out_dir / BENCH_NAME, (row.as_row() for row in bench_report.rows), BENCH_COLUMNS)
        summary_path = write_csv(out_dir / BENCH_SUMMARY_NAME, bench_report.summary_rows(), SUMMARY_COLUMNS)
        return BenchResult(comparison_path=comparison_path, summary_path=summary_path, report=bench_report)
