"""Configuration schema for runs: model, diffusion, sampler, data and training sections."""

from enum import Enum
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class StrictModel(BaseModel):
    """Base for every config section: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")


def _check_odd(value: int, field_name: str) -> int:
    if value < 1 or value % 2 == 0:
        raise ValueError(f"{field_name} must be an odd positive integer, got {value}")
    return value


class MaskKind(str, Enum):
    """Condition mask kinds sampled during training."""
    ONES = "ones"
    ZEROS = "zeros"
    BOUNDARY = "boundary"
    RELATION = "relation"


class EncoderConfig(StrictModel):
    """TDP encoder: input projection, stacked TDP layers, each followed by IN + FNN."""

    input_dim: int = Field(default=16, ge=1, description="Feature dimension D")
    hidden: int = Field(default=64, ge=1, description="Hidden width H")
    num_layers: int = Field(default=8, ge=1, description="Number of TDP layers")
    window: int = Field(default=3, description="Conv_w window size (odd)")
    maxpool_window: int = Field(default=3, description="Boundary-branch max-pool window (odd)")
    dilations: Optional[List[int]] = Field(default=None, description="Per-layer dilations; default 2^i")
    ffn_expansion: int = Field(default=2, ge=1, description="Feedforward expansion factor")
    norm_eps: float = Field(default=1e-5, gt=0)

    @field_validator("window")
    @classmethod
    def validate_window(cls, v):
        return _check_odd(v, "window")

    @field_validator("maxpool_window")
    @classmethod
    def validate_maxpool_window(cls, v):
        return _check_odd(v, "maxpool_window")

    @model_validator(mode="after")
    def fill_dilations(self):
        if self.dilations is None:
            self.dilations = [2 ** i for i in range(self.num_layers)]
        if len(self.dilations) != self.num_layers:
            raise ValueError(
                f"dilation schedule has {len(self.dilations)} entries for {self.num_layers} layers"
            )
        if any(d < 1 for d in self.dilations):
            raise ValueError("dilations must be >= 1")
        return self


class DecoderConfig(StrictModel):
    """Denoising decoder: dilated separable conv, cross-attention and FNN per block."""

    hidden: Optional[int] = Field(default=None, ge=1, description="Must match the encoder width")
    num_blocks: int = Field(default=4, ge=1)
    window: int = Field(default=3)
    dilations: Optional[List[int]] = Field(default=None, description="Per-block dilations; default 2^i")
    heads: int = Field(default=1, ge=1, description="Cross-attention head count")
    step_embed_dim: Optional[int] = Field(default=None, ge=2, description="Sinusoid size; default H")
    ffn_expansion: int = Field(default=2, ge=1)
    norm_eps: float = Field(default=1e-5, gt=0)

    @field_validator("window")
    @classmethod
    def validate_window(cls, v):
        return _check_odd(v, "window")

    @model_validator(mode="after")
    def fill_dilations(self):
        if self.dilations is None:
            self.dilations = [2 ** i for i in range(self.num_blocks)]
        if len(self.dilations) != self.num_blocks:
            raise ValueError(f"decoder has {len(self.dilations)} dilations for {self.num_blocks} blocks")
        if any(d < 1 for d in self.dilations):
            raise ValueError("decoder dilations must be >= 1")
        if self.step_embed_dim is not None and self.step_embed_dim % 2:
            raise ValueError("step_embed_dim must be even")
        return self


class DiffusionConfig(StrictModel):
    """Noise schedule and label embedding."""

    steps: int = Field(default=1000, ge=2, description="Total diffusion steps S")
    schedule_offset: float = Field(default=0.008, gt=0, description="Cosine schedule offset")
    label_scale: float = Field(default=1.0, gt=0, description="One-hot rows map to +/- scale")


class SamplerConfig(StrictModel):
    """DDIM sampling with fixed or adaptive skip lengths."""

    total_steps: int = Field(default=1000, ge=2, description="S; must match diffusion.steps")
    delta_init: int = Field(default=40, ge=1, description="Initial (or fixed) skip length")
    eta: float = Field(default=0.0, ge=0.0, le=1.0, description="0 = deterministic DDIM")
    gamma: float = Field(default=2.0, gt=1.0, description="Skip growth/shrink factor")
    theta_high: float = Field(default=0.999, gt=0.0, lt=1.0)
    theta_low: float = Field(default=0.990, gt=0.0, lt=1.0)
    delta_min: int = Field(default=1, ge=1)
    delta_max: Optional[int] = Field(default=None, ge=1, description="Default S/5")
    similarity_space: Literal["latent", "probs"] = "latent"
    fp32: bool = Field(default=False, description="Run sampling with 32-bit tensors")

    @model_validator(mode="after")
    def validate_bounds(self):
        if self.delta_max is None:
            self.delta_max = max(1, self.total_steps // 5)
        if self.theta_low > self.theta_high:
            raise ValueError(f"theta_low ({self.theta_low}) must not exceed theta_high ({self.theta_high})")
        if not self.delta_min <= self.delta_init <= self.delta_max <= self.total_steps:
            raise ValueError(
                "need delta_min <= delta_init <= delta_max <= total_steps, got "
                f"{self.delta_min}, {self.delta_init}, {self.delta_max}, {self.total_steps}"
            )
        return self


class MaskingConfig(StrictModel):
    """Condition masks drawn per training step."""

    boundary_radius: int = Field(default=4, ge=0)
    kinds: List[MaskKind] = Field(default_factory=lambda: list(MaskKind))

    @field_validator("kinds")
    @classmethod
    def validate_kinds(cls, v):
        if not v:
            raise ValueError("at least one mask kind is required")
        return v


class LossConfig(StrictModel):
    """Cross-entropy + smoothness + boundary loss settings."""

    boundary_sigma: float = Field(default=1.0, ge=0.0, description="Gaussian std for boundary targets")
    prob_floor: float = Field(default=1e-7, gt=0.0, lt=0.5)
    smooth_clamp: Optional[float] = Field(default=None, gt=0.0, description="16.0 enables the clamped variant")


class SyntheticGenConfig(StrictModel):
    """Synthetic videos standing in for precomputed I3D features."""

    num_videos: int = Field(default=3, ge=1)
    eval_videos: int = Field(default=0, ge=0, description="Videos tagged 'eval'; 0 evaluates on train")
    length_min: int = Field(default=128, ge=1)
    length_max: int = Field(default=128, ge=1)
    num_classes: int = Field(default=5, ge=2)
    feature_dim: int = Field(default=16, ge=1)
    min_segment: int = Field(default=8, ge=1)
    max_segment: int = Field(default=32, ge=1)
    separation: float = Field(default=4.0, gt=0.0, description="Distance scale of class means")
    noise_std: float = Field(default=1.0, ge=0.0)
    blur_radius: int = Field(default=2, ge=0)
    seed: int = Field(default=7, ge=0)

    @model_validator(mode="after")
    def validate_ranges(self):
        if self.length_min > self.length_max:
            raise ValueError("length_min must not exceed length_max")
        if self.length_min < self.min_segment:
            raise ValueError("length_min must be at least min_segment")
        if self.max_segment < 2 * self.min_segment:
            raise ValueError("max_segment must be at least twice min_segment so lengths can be tiled")
        if self.eval_videos >= self.num_videos and self.eval_videos > 0:
            raise ValueError("eval_videos must leave at least one training video")
        return self


class AugmentationConfig(StrictModel):
    """Sub-sequence augmentation and median filtering."""

    rate: int = Field(default=4, ge=1, description="Number of interleaved sub-sequences R")
    inference: bool = Field(default=True)
    train_time: bool = Field(default=False, description="Also train on a random sub-sequence")
    median_window: int = Field(default=9)

    @field_validator("median_window")
    @classmethod
    def validate_median_window(cls, v):
        return _check_odd(v, "median_window")


class TrainingConfig(StrictModel):
    """Optimizer and loop settings."""

    lr: float = Field(default=5e-4, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    steps: int = Field(default=3000, ge=1)
    batch_size: int = Field(default=1, ge=1)
    log_every: int = Field(default=10, ge=1)
    checkpoint_every: int = Field(default=500, ge=1)


class BenchConfig(StrictModel):
    """Fixed vs adaptive comparison settings."""

    repetitions: int = Field(default=3, ge=1, description="Wall time is the median over repetitions")
    step_budgets: List[int] = Field(default_factory=lambda: [8, 16, 25])
    rank_length: int = Field(default=64, ge=2)
    rank_hidden: int = Field(default=64, ge=2)
    rank_layers: int = Field(default=8, ge=1)
    workers: int = Field(default=1, ge=1, description="Videos evaluated concurrently")


class LoggingConfig(StrictModel):
    level: str = Field(default="INFO")
    format: Literal["console", "json"] = "console"
    file: Optional[str] = None

    @field_validator("level")
    @classmethod
    def validate_level(cls, v):
        valid_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if v.upper() not in valid_levels:
            raise ValueError(f"Log level must be one of: {valid_levels}")
        return v.upper()


class RunConfig(StrictModel):
    """Root configuration for every command."""

    version: str = Field(default="1")
    seed: int = Field(default=7, ge=0)

    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    diffusion: DiffusionConfig = Field(default_factory=DiffusionConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    masking: MaskingConfig = Field(default_factory=MaskingConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    dataset: SyntheticGenConfig = Field(default_factory=SyntheticGenConfig)
    augmentation: AugmentationConfig = Field(default_factory=AugmentationConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @model_validator(mode="after")
    def validate_consistency(self):
        if self.decoder.hidden is None:
            self.decoder.hidden = self.encoder.hidden
        elif self.decoder.hidden != self.encoder.hidden:
            raise ValueError(
                f"decoder.hidden ({self.decoder.hidden}) must equal encoder.hidden ({self.encoder.hidden})"
            )
        if self.decoder.hidden % self.decoder.heads:
            raise ValueError(f"hidden width {self.decoder.hidden} is not divisible by {self.decoder.heads} heads")
        if self.decoder.step_embed_dim is None and self.decoder.hidden % 2:
            raise ValueError(
                f"hidden width {self.decoder.hidden} is odd; set decoder.step_embed_dim to an even size"
            )
        if self.sampler.total_steps != self.diffusion.steps:
            raise ValueError(
                f"sampler.total_steps ({self.sampler.total_steps}) must equal diffusion.steps ({self.diffusion.steps})"
            )
        if self.dataset.feature_dim != self.encoder.input_dim:
            raise ValueError(
                f"dataset.feature_dim ({self.dataset.feature_dim}) must equal encoder.input_dim ({self.encoder.input_dim})"
            )
        return self
