"""Per-video prediction: sampling, optional sub-sequence augmentation and median filtering."""

import time
from dataclasses import asdict, dataclass, field
from typing import List, Literal, Optional, Sequence

import numpy as np

from ..config.schema import RunConfig
from ..data.augment import predict_with_augmentation
from ..diffusion.sampler import TRAJECTORY_COLUMNS, DDIMSampler, SamplingResult
from ..diffusion.schedule import LabelCodec, make_schedule
from ..models.segmenter import Segmenter
from ..utils.logging import LoggerMixin


Strategy = Literal["fixed", "adaptive"]

TRAJECTORY_CSV_COLUMNS = ["video_id", "part"] + TRAJECTORY_COLUMNS


@dataclass
class VideoPrediction:
    video_id: str
    labels: np.ndarray
    results: List[SamplingResult] = field(default_factory=list)
    wall_ms: float = 0.0

    @property
    def denoiser_calls(self) -> int:
        return sum(result.denoiser_calls for result in self.results)

    def trajectory_rows(self) -> List[dict]:
        rows = []
        for part, result in enumerate(self.results):
            for step in result.trajectory:
                rows.append({"video_id": self.video_id, "part": part, **asdict(step)})
        return rows


class VideoPredictor(LoggerMixin):
    """Turns features into class ids with a trained segmenter."""

    def __init__(self, model: Segmenter, config: RunConfig):
        self.model = model
        self.config = config
        self.schedule = make_schedule(config.diffusion.steps, config.diffusion.schedule_offset)
        self.codec = LabelCodec(config.diffusion.label_scale)
        self.sampler = DDIMSampler(config.sampler, self.schedule, self.codec)

    def sample(
        self,
        features: np.ndarray,
        strategy: Strategy,
        rng: np.random.Generator,
        num_steps: Optional[int] = None,
    ) -> SamplingResult:
        denoiser = self.model.as_denoiser(features)
        shape = (features.shape[0], self.model.num_classes)
        if strategy == "adaptive":
            return self.sampler.infer_adaptive(denoiser, shape, rng)
        if strategy == "fixed":
            return self.sampler.infer_fixed(denoiser, shape, rng, num_steps=num_steps)
        raise ValueError(f"Unknown sampling strategy {strategy!r}")

    def predict(
        self,
        video_id: str,
        features: np.ndarray,
        strategy: Strategy = "fixed",
        seed: Sequence[int] = (0,),
        augment: Optional[bool] = None,
        num_steps: Optional[int] = None,
    ) -> VideoPrediction:
        """Sample every sub-sequence from one rng seeded with ``seed``.

        Equal seeds give every strategy the same initial noise.
        """
        augment = self.config.augmentation.inference if augment is None else augment
        rng = np.random.default_rng(list(seed))
        prediction = VideoPrediction(video_id=video_id, labels=np.empty(0, dtype=np.int64))
        features = np.asarray(features, dtype=np.float64)
        started = time.perf_counter()

        def predict_part(part: np.ndarray) -> np.ndarray:
            result = self.sample(part, strategy, rng, num_steps)
            prediction.results.append(result)
            return result.labels

        if augment:
            aug = self.config.augmentation
            prediction.labels = predict_with_augmentation(predict_part, features, aug.rate, aug.median_window)
        else:
            prediction.labels = predict_part(features)

        prediction.wall_ms = (time.perf_counter() - started) * 1000.0
        self.logger.debug(
            "Video predicted",
            video_id=video_id,
            strategy=strategy,
            denoiser_calls=prediction.denoiser_calls,
            wall_ms=round(prediction.wall_ms, 2),
        )
        return prediction
