"""Seeded synthetic videos: a first-order action chain rendered as noisy, blurred class means."""

from typing import List

import numpy as np
from scipy.ndimage import uniform_filter1d

from ..config.schema import SyntheticGenConfig
from ..utils.logging import LoggerMixin
from .models import ClassMapping, FeatureSequence, VideoRecord


class SyntheticVideoGenerator(LoggerMixin):
    """Generates labelled feature sequences from a :class:`SyntheticGenConfig`.

    All randomness flows from one generator seeded with ``config.seed``, so the same
    config always yields bit-identical videos.
    """

    def __init__(self, config: SyntheticGenConfig):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.mapping = ClassMapping(tuple(f"action_{i:02d}" for i in range(config.num_classes)))
        self.class_means = self._class_means()
        self.transitions = self._transition_matrix()

    def _class_means(self) -> np.ndarray:
        cfg = self.config
        raw = self.rng.standard_normal((cfg.num_classes, cfg.feature_dim))
        if cfg.num_classes <= cfg.feature_dim:
            # Orthonormal rows keep every pair of classes equally far apart.
            q, _ = np.linalg.qr(raw.T)
            directions = q.T[: cfg.num_classes]
        else:
            directions = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        return cfg.separation * directions

    def _transition_matrix(self) -> np.ndarray:
        """Random row-stochastic matrix with no self-transitions."""
        classes = self.config.num_classes
        weights = self.rng.dirichlet(np.ones(classes - 1), size=classes)
        matrix = np.zeros((classes, classes))
        for c in range(classes):
            matrix[c, np.arange(classes) != c] = weights[c]
        return matrix

    def sample_durations(self, length: int) -> List[int]:
        """Tile ``length`` frames with segment lengths in ``[min_segment, max_segment]``."""
        low, high = self.config.min_segment, self.config.max_segment
        durations = []
        remaining = length
        while remaining > 0:
            candidates = [
                d for d in range(low, min(high, remaining) + 1)
                if remaining - d == 0 or remaining - d >= low
            ]
            duration = int(self.rng.choice(candidates))
            durations.append(duration)
            remaining -= duration
        return durations

    def sample_labels(self, length: int) -> np.ndarray:
        durations = self.sample_durations(length)
        current = int(self.rng.integers(self.config.num_classes))
        sequence = []
        for duration in durations:
            sequence.append(np.full(duration, current, dtype=np.int64))
            current = int(self.rng.choice(self.config.num_classes, p=self.transitions[current]))
        return np.concatenate(sequence)

    def render_features(self, labels: np.ndarray, blur: bool = True) -> np.ndarray:
        cfg = self.config
        features = self.class_means[labels] + cfg.noise_std * self.rng.standard_normal((labels.size, cfg.feature_dim))
        if blur and cfg.blur_radius > 0:
            features = uniform_filter1d(features, size=2 * cfg.blur_radius + 1, axis=0, mode="nearest")
        return features.astype(np.float32)

    def generate(self) -> List[VideoRecord]:
        cfg = self.config
        videos = []
        for index in range(cfg.num_videos):
            length = int(self.rng.integers(cfg.length_min, cfg.length_max + 1))
            labels = self.sample_labels(length)
            features = self.render_features(labels)
            split = "eval" if index >= cfg.num_videos - cfg.eval_videos else "train"
            videos.append(VideoRecord(
                video_id=f"video_{index:03d}",
                features=FeatureSequence(features),
                labels=self.mapping.decode(labels),
                split=split,
            ))

        self.logger.info(
            "Generated synthetic videos",
            videos=len(videos),
            classes=cfg.num_classes,
            feature_dim=cfg.feature_dim,
            seed=cfg.seed,
        )
        return videos


def generate_synthetic(config: SyntheticGenConfig) -> List[VideoRecord]:
    return SyntheticVideoGenerator(config).generate()
