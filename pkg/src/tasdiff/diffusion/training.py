"""Training loop: corrupt labels at a random step, denoise, apply the three losses."""

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from .. import autodiff as ad
from ..autodiff import Adam, AdamState
from ..config.schema import RunConfig
from ..models.segmenter import Segmenter
from ..utils.logging import LoggerMixin
from .losses import boundary_sequence, loss_terms, smooth_boundaries
from .masking import sample_mask
from .schedule import DiffusionError, LabelCodec, corrupt, make_schedule, one_hot


LOSS_LOG_COLUMNS = ["step", "loss", "ce", "smooth", "boundary", "s", "mask_kind"]


class TrainingError(DiffusionError):
    """Raised when a training step produces a non-finite loss."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
        self.summary: Optional["TrainingSummary"] = None


@dataclass
class TrainingExample:
    """Features and class ids of one video, ready for the trainer."""

    video_id: str
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise DiffusionError(
                f"Video {self.video_id}: features {self.features.shape} do not match {self.labels.shape[0]} labels"
            )
        if self.labels.size == 0:
            raise DiffusionError(f"Video {self.video_id} has no frames")

    def subsequence(self, offset: int, rate: int) -> "TrainingExample":
        return TrainingExample(self.video_id, self.features[offset::rate], self.labels[offset::rate])


@dataclass
class LossRecord:
    step: int
    loss: float
    ce: float
    smooth: float
    boundary: float
    s: int
    mask_kind: str

    def as_row(self) -> dict:
        return {name: getattr(self, name) for name in LOSS_LOG_COLUMNS}


@dataclass
class TrainingSummary:
    start_step: int
    end_step: int
    losses: List[float] = field(default_factory=list)
    records: List[LossRecord] = field(default_factory=list)
    duration_seconds: float = 0.0

    @property
    def initial_loss(self) -> float:
        return self.losses[0] if self.losses else float("nan")

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


@dataclass
class TrainerSnapshot:
    params: Dict[str, np.ndarray]
    optimizer_state: AdamState


class Trainer(LoggerMixin):
    """Owns a segmenter, its optimizer, the schedule and the sampling rng."""

    def __init__(
        self,
        model: Segmenter,
        config: RunConfig,
        optimizer: Optional[Adam] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        self.model = model
        self.config = config
        self.schedule = make_schedule(config.diffusion.steps, config.diffusion.schedule_offset)
        self.codec = LabelCodec(config.diffusion.label_scale)
        self.optimizer = optimizer or Adam(
            model.parameters(),
            lr=config.training.lr,
            betas=(config.training.beta1, config.training.beta2),
            eps=config.training.eps,
        )
        self.rng = rng if rng is not None else np.random.default_rng([config.seed, 1])
        self._last_good: Optional[TrainerSnapshot] = None

    @property
    def step_count(self) -> int:
        return self.optimizer.step_count

    def _forward_backward(self, example: TrainingExample, weight: float) -> LossRecord:
        augmentation = self.config.augmentation
        if augmentation.train_time and augmentation.rate > 1:
            offset = int(self.rng.integers(min(augmentation.rate, example.labels.size)))
            example = example.subsequence(offset, augmentation.rate)

        step = int(self.rng.integers(1, self.schedule.steps + 1))
        mask = sample_mask(
            example.labels,
            rng=self.rng,
            radius=self.config.masking.boundary_radius,
            kinds=self.config.masking.kinds,
        )
        targets = one_hot(example.labels, self.model.num_classes)
        noise = self.rng.standard_normal(targets.shape)
        noisy = corrupt(self.codec.encode(targets), step, self.schedule, noise)
        boundary_targets = smooth_boundaries(boundary_sequence(example.labels), self.config.loss.boundary_sigma)

        cond = self.model.encode(example.features)
        probs = self.model.decode(noisy, step, cond, mask.values)
        terms = loss_terms(probs, targets, boundary_targets, self.config.loss)
        values = terms.values()

        if not np.isfinite(values["loss"]):
            diagnostics = {
                "step": self.step_count,
                "video_id": example.video_id,
                "diffusion_step": step,
                "mask_kind": mask.kind.value,
                **values,
                "prob_min": float(probs.data.min()),
                "prob_max": float(probs.data.max()),
            }
            self.logger.error("Non-finite training loss; aborting", **diagnostics)
            raise TrainingError(f"Non-finite loss at step {self.step_count}", diagnostics)

        ad.scale(terms.total, weight).backward()
        return LossRecord(
            step=self.step_count + 1,
            s=step,
            mask_kind=mask.kind.value,
            **values,
        )

    def _snapshot(self) -> TrainerSnapshot:
        return TrainerSnapshot(
            params={name: p.data.copy() for name, p in self.optimizer.params.items()},
            optimizer_state=self.optimizer.state,
        )

    def restore_last_good(self) -> bool:
        """Roll back to the parameters and moments before the last optimizer step.

        The parameters before the last update are the last ones that produced a finite loss.
        """
        if self._last_good is None:
            return False
        for name, value in self._last_good.params.items():
            self.optimizer.params[name].data[...] = value
        self.optimizer.state = self._last_good.optimizer_state
        self._last_good = None
        self.logger.warning("Restored last good parameters", step=self.step_count)
        return True

    def _batch_step(self, examples: Sequence[TrainingExample]) -> LossRecord:
        """Accumulate gradients over ``examples`` then apply one optimizer step."""
        self.optimizer.zero_grad()
        weight = 1.0 / len(examples)
        records = [self._forward_backward(example, weight) for example in examples]
        self._last_good = self._snapshot()
        self.optimizer.step()
        if len(records) == 1:
            return records[0]
        merged = records[-1]
        for name in ("loss", "ce", "smooth", "boundary"):
            setattr(merged, name, float(np.mean([getattr(r, name) for r in records])))
        return merged

    def training_step(self, example: TrainingExample) -> LossRecord:
        """One optimizer step on a single video."""
        return self._batch_step([example])

    def train(
        self,
        examples: Sequence[TrainingExample],
        steps: Optional[int] = None,
        progress: bool = False,
        on_checkpoint: Optional[Callable[[int], None]] = None,
    ) -> TrainingSummary:
        """Run ``steps`` optimizer steps, each on ``batch_size`` randomly drawn videos."""
        if not examples:
            raise DiffusionError("No training videos")
        steps = steps if steps is not None else self.config.training.steps
        cfg = self.config.training
        summary = TrainingSummary(start_step=self.step_count, end_step=self.step_count)
        started = time.perf_counter()

        self.logger.info("Training started", steps=steps, videos=len(examples), start_step=self.step_count)
        bar = tqdm(range(steps), desc="train", disable=not progress, leave=False)
        for _ in bar:
            batch = [examples[int(self.rng.integers(len(examples)))] for _ in range(cfg.batch_size)]
            try:
                record = self._batch_step(batch)
            except TrainingError as e:
                self.restore_last_good()
                summary.end_step = self.step_count
                summary.duration_seconds = time.perf_counter() - started
                e.summary = summary
                raise
            summary.losses.append(record.loss)

            if record.step % cfg.log_every == 0 or len(summary.losses) == steps:
                summary.records.append(record)
                bar.set_postfix(loss=f"{record.loss:.4f}")
                self.logger.info(
                    "Training step completed",
                    step=record.step,
                    loss=round(record.loss, 6),
                    s=record.s,
                    mask_kind=record.mask_kind,
                )
            if on_checkpoint is not None and record.step % cfg.checkpoint_every == 0:
                on_checkpoint(record.step)

        summary.end_step = self.step_count
        summary.duration_seconds = time.perf_counter() - started
        self.logger.info(
            "Training finished",
            steps=steps,
            initial_loss=summary.initial_loss,
            final_loss=summary.final_loss,
            duration_seconds=round(summary.duration_seconds, 2),
        )
        return summary
