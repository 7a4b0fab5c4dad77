"""DDIM denoising with a fixed or similarity-driven skip length."""

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..config.schema import SamplerConfig
from ..utils.logging import LoggerMixin, get_logger
from .schedule import DiffusionError, DiffusionSchedule, LabelCodec


logger = get_logger(__name__)

Denoiser = Callable[[np.ndarray, int], np.ndarray]
SimilarityFn = Callable[[np.ndarray, np.ndarray], float]

TRAJECTORY_COLUMNS = ["s_from", "s", "delta", "similarity", "denoiser_calls", "wall_ms"]


class SamplerError(DiffusionError):
    """Raised for invalid step pairs or a negative DDIM radicand."""
    pass


def ddim_sigma(schedule: DiffusionSchedule, step: int, next_step: int, eta: float) -> float:
    """``eta * sqrt((1 - a_next) / (1 - a_s)) * sqrt(1 - a_s / a_next)``."""
    if eta == 0.0:
        return 0.0
    a_s = schedule.alpha_bar[step]
    a_next = schedule.alpha_bar[next_step]
    return float(eta * math.sqrt((1.0 - a_next) / (1.0 - a_s)) * math.sqrt(max(0.0, 1.0 - a_s / a_next)))


def ddim_step(
    latent: np.ndarray,
    probs: np.ndarray,
    step: int,
    next_step: int,
    schedule: DiffusionSchedule,
    codec: LabelCodec,
    sigma: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """One denoising jump from ``step`` to ``next_step`` given the predicted probabilities."""
    if not 0 <= next_step < step <= schedule.steps:
        raise SamplerError(f"Need 0 <= next_step < step <= {schedule.steps}, got {next_step} and {step}")
    latent = np.asarray(latent, dtype=np.float64)
    predicted = codec.encode(probs)
    if predicted.shape != latent.shape:
        raise SamplerError(f"Prediction shape {predicted.shape} does not match latent {latent.shape}")

    a_s = schedule.alpha_bar[step]
    a_next = schedule.alpha_bar[next_step]
    radicand = 1.0 - a_next - sigma ** 2
    if radicand < -1e-12:
        raise SamplerError(
            f"sigma={sigma} too large for step {step}->{next_step}: 1 - alpha_bar_next - sigma^2 = {radicand}"
        )

    noise_direction = (latent - math.sqrt(a_s) * predicted) / math.sqrt(1.0 - a_s)
    out = math.sqrt(a_next) * predicted + math.sqrt(max(radicand, 0.0)) * noise_direction
    if sigma > 0.0:
        if rng is None:
            raise SamplerError("A positive sigma needs an rng for the injected noise")
        out = out + sigma * rng.standard_normal(latent.shape)
    return out


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Absolute cosine similarity of two flattened sequences."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise SamplerError(f"Similarity needs equal shapes, got {a.shape} and {b.shape}")
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0.0:
        logger.warning("Similarity of a zero-norm sequence; treating as 0")
        return 0.0
    return float(min(1.0, abs(a @ b) / norm))


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def adjust_delta(delta: int, sim: float, config: SamplerConfig) -> int:
    """Grow the skip on high similarity, shrink it on low similarity, then clamp."""
    if sim > config.theta_high:
        new_delta = _round_half_up(delta * config.gamma)
    elif sim < config.theta_low:
        new_delta = max(1, _round_half_up(delta / config.gamma))
    else:
        new_delta = delta
    return int(min(max(new_delta, config.delta_min), config.delta_max))


def fixed_timesteps(total_steps: int, num_steps: int) -> List[int]:
    """Evenly spaced steps from ``total_steps`` down to 0, making ``num_steps`` jumps."""
    if not 1 <= num_steps <= total_steps:
        raise SamplerError(f"Step budget must lie in [1, {total_steps}], got {num_steps}")
    steps = [int(s) for s in np.round(np.linspace(total_steps, 0, num_steps + 1))]
    if any(b >= a for a, b in zip(steps, steps[1:])):
        raise SamplerError(f"Step budget {num_steps} does not give strictly decreasing steps")
    return steps


def delta_timesteps(total_steps: int, delta: int) -> List[int]:
    """``S, S - delta, ...`` with the final jump landing on 0."""
    if delta < 1:
        raise SamplerError(f"Skip length must be >= 1, got {delta}")
    steps = list(range(total_steps, 0, -delta))
    return steps + [0]


@dataclass
class TrajectoryStep:
    s_from: int
    s: int
    delta: int
    similarity: float
    denoiser_calls: int
    wall_ms: float


@dataclass
class SamplingResult:
    probs: np.ndarray
    latent: np.ndarray
    trajectory: List[TrajectoryStep] = field(default_factory=list)

    @property
    def labels(self) -> np.ndarray:
        return self.probs.argmax(axis=1)

    @property
    def denoiser_calls(self) -> int:
        return self.trajectory[-1].denoiser_calls if self.trajectory else 0

    @property
    def wall_ms(self) -> float:
        return float(sum(row.wall_ms for row in self.trajectory))

    def trajectory_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.trajectory], columns=TRAJECTORY_COLUMNS)


class DDIMSampler(LoggerMixin):
    """Runs a denoiser from pure noise at ``S`` down to step 0."""

    def __init__(self, config: SamplerConfig, schedule: DiffusionSchedule, codec: Optional[LabelCodec] = None):
        if config.total_steps != schedule.steps:
            raise SamplerError(f"Sampler expects {config.total_steps} steps but the schedule has {schedule.steps}")
        self.config = config
        self.schedule = schedule
        self.codec = codec or LabelCodec()

    def initial_latent(self, shape: Tuple[int, int], rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(shape)

    def _similarity(self, before: np.ndarray, after: np.ndarray, similarity_fn: Optional[SimilarityFn]) -> float:
        if similarity_fn is not None:
            return float(similarity_fn(before, after))
        if self.config.similarity_space == "probs":
            return similarity(self.codec.decode(before), self.codec.decode(after))
        return similarity(before, after)

    def _jump(
        self,
        denoiser: Denoiser,
        latent: np.ndarray,
        step: int,
        next_step: int,
        rng: np.random.Generator,
    ) -> Tuple[np.ndarray, np.ndarray]:
        probs = np.asarray(denoiser(latent, step), dtype=np.float64)
        sigma = ddim_sigma(self.schedule, step, next_step, self.config.eta)
        return probs, ddim_step(latent, probs, step, next_step, self.schedule, self.codec, sigma, rng)

    def run_timesteps(
        self,
        denoiser: Denoiser,
        shape: Tuple[int, int],
        timesteps: Sequence[int],
        rng: np.random.Generator,
        latent: Optional[np.ndarray] = None,
    ) -> SamplingResult:
        """Denoise along a precomputed decreasing list of steps ending at 0."""
        if not timesteps or timesteps[0] != self.schedule.steps or timesteps[-1] != 0:
            raise SamplerError(f"Timesteps must run from {self.schedule.steps} to 0")
        latent = self.initial_latent(shape, rng) if latent is None else np.asarray(latent, dtype=np.float64)
        trajectory: List[TrajectoryStep] = []
        probs = None

        for calls, (step, next_step) in enumerate(zip(timesteps, timesteps[1:]), start=1):
            started = time.perf_counter()
            probs, updated = self._jump(denoiser, latent, step, next_step, rng)
            sim = self._similarity(latent, updated, None)
            trajectory.append(TrajectoryStep(
                s_from=step,
                s=next_step,
                delta=step - next_step,
                similarity=sim,
                denoiser_calls=calls,
                wall_ms=(time.perf_counter() - started) * 1000.0,
            ))
            latent = updated

        self.logger.debug("Fixed sampling finished", denoiser_calls=len(trajectory))
        return SamplingResult(probs=probs, latent=latent, trajectory=trajectory)

    def infer_fixed(
        self,
        denoiser: Denoiser,
        shape: Tuple[int, int],
        rng: np.random.Generator,
        delta: Optional[int] = None,
        num_steps: Optional[int] = None,
        latent: Optional[np.ndarray] = None,
    ) -> SamplingResult:
        """Fixed skip of ``delta`` (``ceil(S / delta)`` calls), or an even ``num_steps`` budget."""
        if num_steps is not None:
            timesteps = fixed_timesteps(self.schedule.steps, num_steps)
        else:
            timesteps = delta_timesteps(self.schedule.steps, delta or self.config.delta_init)
        return self.run_timesteps(denoiser, shape, timesteps, rng, latent)

    def infer_adaptive(
        self,
        denoiser: Denoiser,
        shape: Tuple[int, int],
        rng: np.random.Generator,
        similarity_fn: Optional[SimilarityFn] = None,
        latent: Optional[np.ndarray] = None,
    ) -> SamplingResult:
        """Commit each jump, then resize the next one from the similarity of the two latents."""
        latent = self.initial_latent(shape, rng) if latent is None else np.asarray(latent, dtype=np.float64)
        step = self.schedule.steps
        delta = self.config.delta_init
        trajectory: List[TrajectoryStep] = []
        probs = None

        while step > 0:
            started = time.perf_counter()
            jump = min(delta, step)
            next_step = step - jump
            probs, updated = self._jump(denoiser, latent, step, next_step, rng)
            sim = self._similarity(latent, updated, similarity_fn)
            trajectory.append(TrajectoryStep(
                s_from=step,
                s=next_step,
                delta=jump,
                similarity=sim,
                denoiser_calls=len(trajectory) + 1,
                wall_ms=(time.perf_counter() - started) * 1000.0,
            ))
            new_delta = adjust_delta(delta, sim, self.config)
            if new_delta != delta:
                self.logger.debug("Skip length adjusted", step=next_step, similarity=sim, old=delta, new=new_delta)
            delta = new_delta
            latent = updated
            step = next_step

        self.logger.debug("Adaptive sampling finished", denoiser_calls=len(trajectory))
        return SamplingResult(probs=probs, latent=latent, trajectory=trajectory)
