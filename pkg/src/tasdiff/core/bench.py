"""Fixed versus adaptive sampling comparison, step-budget sweep and model size figures."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..config.schema import RunConfig
from ..data.models import ClassMapping, VideoRecord
from ..diffusion.sampler import delta_timesteps
from ..evaluation.metrics import METRIC_COLUMNS, MetricBundle, mean_bundle, report
from ..models.encoder import RankDiagnostic, rank_diagnostic
from ..utils.logging import LoggerMixin
from .inference import Strategy, VideoPredictor


BENCH_COLUMNS = ["video_id", "strategy", "steps_budget", "denoiser_calls", "sampling_runs", "wall_ms"] + METRIC_COLUMNS
SUMMARY_COLUMNS = ["metric", "value"]


@dataclass
class BenchRow:
    video_id: str
    strategy: str
    steps_budget: Optional[int]
    denoiser_calls: Union[int, float]
    wall_ms: float
    metrics: MetricBundle
    sampling_runs: int = 1

    def as_row(self) -> dict:
        return {
            "video_id": self.video_id,
            "strategy": self.strategy,
            "steps_budget": self.steps_budget,
            "denoiser_calls": self.denoiser_calls,
            "sampling_runs": self.sampling_runs,
            "wall_ms": self.wall_ms,
            **self.metrics.as_dict(),
        }


@dataclass
class BenchReport:
    rows: List[BenchRow] = field(default_factory=list)
    rank: Optional[RankDiagnostic] = None
    parameter_count: int = 0
    storage_bytes: int = 0
    checkpoint_bytes: int = 0

    def select(self, strategy: str, steps_budget: Optional[int] = None) -> List[BenchRow]:
        return [
            row for row in self.rows
            if row.strategy == strategy and (steps_budget is None or row.steps_budget == steps_budget)
        ]

    def mean_calls(self, strategy: str, steps_budget: Optional[int] = None) -> float:
        rows = self.select(strategy, steps_budget)
        return float(np.mean([row.denoiser_calls for row in rows])) if rows else float("nan")

    def median_wall_ms(self, strategy: str) -> float:
        rows = self.select(strategy)
        return float(np.median([row.wall_ms for row in rows])) if rows else float("nan")

    def mean_metrics(self, strategy: str, steps_budget: Optional[int] = None) -> Optional[MetricBundle]:
        rows = self.select(strategy, steps_budget)
        return mean_bundle([row.metrics for row in rows]) if rows else None

    @property
    def call_reduction_pct(self) -> float:
        """Relative drop in denoiser calls from fixed to adaptive sampling, in percent."""
        fixed = self.mean_calls("fixed")
        if not fixed or math.isnan(fixed):
            return float("nan")
        return 100.0 * (fixed - self.mean_calls("adaptive")) / fixed

    @property
    def max_metric_gap(self) -> float:
        """Largest absolute difference between the mean fixed and adaptive metric bundles."""
        fixed, adaptive = self.mean_metrics("fixed"), self.mean_metrics("adaptive")
        if fixed is None or adaptive is None:
            return float("nan")
        fixed_row, adaptive_row = fixed.as_dict(), adaptive.as_dict()
        return max(abs(fixed_row[key] - adaptive_row[key]) for key in METRIC_COLUMNS)

    def summary_rows(self) -> List[dict]:
        values: Dict[str, float] = {
            "fixed_calls_mean": self.mean_calls("fixed"),
            "adaptive_calls_mean": self.mean_calls("adaptive"),
            "call_reduction_pct": self.call_reduction_pct,
            "fixed_wall_ms_median": self.median_wall_ms("fixed"),
            "adaptive_wall_ms_median": self.median_wall_ms("adaptive"),
            "max_metric_gap": self.max_metric_gap,
        }
        for strategy in ("fixed", "adaptive"):
            bundle = self.mean_metrics(strategy)
            if bundle is not None:
                values[f"{strategy}_avg"] = bundle.avg

        budgets = sorted({row.steps_budget for row in self.select("sweep")})
        for budget in budgets:
            values[f"sweep_{budget}_calls"] = self.mean_calls("sweep", budget)
            values[f"sweep_{budget}_avg"] = self.mean_metrics("sweep", budget).avg

        if self.rank is not None:
            values["input_rank"] = self.rank.input_rank
            values["tdp_rank"] = self.rank.tdp_rank
            values["attention_rank"] = self.rank.attention_rank
        values["parameter_count"] = self.parameter_count
        values["storage_bytes"] = self.storage_bytes
        values["checkpoint_bytes"] = self.checkpoint_bytes
        return [{"metric": key, "value": value} for key, value in values.items()]


class Benchmark(LoggerMixin):
    """Runs every sampling strategy on the same videos with the same noise seeds.

    ``denoiser_calls`` is counted per sampling run. With ``augment`` each video is
    sampled once per sub-sequence and the rows report the mean over those runs.
    """

    def __init__(self, predictor: VideoPredictor, config: RunConfig, augment: bool = False):
        self.predictor = predictor
        self.config = config
        self.augment = augment

    def run_case(
        self,
        video: VideoRecord,
        index: int,
        labels: np.ndarray,
        strategy: Strategy,
        row_strategy: str,
        steps_budget: Optional[int] = None,
        num_steps: Optional[int] = None,
    ) -> BenchRow:
        """Repeat one strategy and keep the median wall time; predictions repeat exactly."""
        runs = [
            self.predictor.predict(
                video.video_id,
                video.features.values,
                strategy=strategy,
                seed=(self.config.seed, index),
                augment=self.augment,
                num_steps=num_steps,
            )
            for _ in range(self.config.bench.repetitions)
        ]
        first = runs[0]
        sampling_runs = len(first.results)
        calls = first.denoiser_calls / sampling_runs
        return BenchRow(
            video_id=video.video_id,
            strategy=row_strategy,
            steps_budget=steps_budget,
            denoiser_calls=int(calls) if calls.is_integer() else calls,
            sampling_runs=sampling_runs,
            wall_ms=float(np.median([run.wall_ms for run in runs])),
            metrics=report(first.labels, labels),
        )

    def run_video(self, video: VideoRecord, index: int, mapping: ClassMapping) -> List[BenchRow]:
        labels = video.label_ids(mapping)
        fixed_budget = len(delta_timesteps(self.config.sampler.total_steps, self.config.sampler.delta_init)) - 1
        rows = [
            self.run_case(video, index, labels, "fixed", "fixed", steps_budget=fixed_budget),
            self.run_case(video, index, labels, "adaptive", "adaptive"),
        ]
        for budget in self.config.bench.step_budgets:
            rows.append(self.run_case(video, index, labels, "fixed", "sweep", steps_budget=budget, num_steps=budget))
        self.logger.info(
            "Video benchmarked",
            video_id=video.video_id,
            fixed_calls=rows[0].denoiser_calls,
            adaptive_calls=rows[1].denoiser_calls,
        )
        return rows

    def run(self, videos: Sequence[VideoRecord], mapping: ClassMapping, checkpoint_bytes: int = 0) -> BenchReport:
        bench = self.config.bench
        with ThreadPoolExecutor(max_workers=bench.workers) as pool:
            per_video = list(pool.map(lambda item: self.run_video(item[1], item[0], mapping), enumerate(videos)))

        model = self.predictor.model
        result = BenchReport(
            rows=[row for rows in per_video for row in rows],
            rank=rank_diagnostic(
                length=bench.rank_length,
                hidden=bench.rank_hidden,
                layers=bench.rank_layers,
                seed=self.config.seed,
                window=self.config.encoder.window,
            ),
            parameter_count=model.count_parameters(),
            storage_bytes=model.storage_bytes(),
            checkpoint_bytes=checkpoint_bytes,
        )
        self.logger.info(
            "Benchmark finished",
            videos=len(videos),
            call_reduction_pct=round(result.call_reduction_pct, 2),
            max_metric_gap=round(result.max_metric_gap, 3),
        )
        return result
