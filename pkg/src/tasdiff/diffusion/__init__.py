"""Noise schedule, losses, condition masks, sampling and training."""

from .schedule import (
    DiffusionError,
    DiffusionSchedule,
    LabelCodec,
    corrupt,
    make_schedule,
    one_hot,
)

from .losses import (
    LossTerms,
    boundary_sequence,
    gaussian_kernel,
    loss_boundary,
    loss_ce,
    loss_smooth,
    loss_terms,
    loss_total,
    smooth_boundaries,
)

from .masking import (
    ConditionMask,
    apply_mask,
    boundary_mask,
    relation_mask,
    sample_mask,
)

from .sampler import (
    TRAJECTORY_COLUMNS,
    DDIMSampler,
    SamplerError,
    SamplingResult,
    TrajectoryStep,
    adjust_delta,
    ddim_sigma,
    ddim_step,
    delta_timesteps,
    fixed_timesteps,
    similarity,
)

from .training import (
    LOSS_LOG_COLUMNS,
    LossRecord,
    Trainer,
    TrainingError,
    TrainingExample,
    TrainingSummary,
)

__all__ = [
    # Schedule and codec
    "DiffusionError",
    "DiffusionSchedule",
    "LabelCodec",
    "corrupt",
    "make_schedule",
    "one_hot",

    # Losses
    "LossTerms",
    "boundary_sequence",
    "gaussian_kernel",
    "loss_boundary",
    "loss_ce",
    "loss_smooth",
    "loss_terms",
    "loss_total",
    "smooth_boundaries",

    # Masking
    "ConditionMask",
    "apply_mask",
    "boundary_mask",
    "relation_mask",
    "sample_mask",

    # Sampling
    "TRAJECTORY_COLUMNS",
    "DDIMSampler",
    "SamplerError",
    "SamplingResult",
    "TrajectoryStep",
    "adjust_delta",
    "ddim_sigma",
    "ddim_step",
    "delta_timesteps",
    "fixed_timesteps",
    "similarity",

    # Training
    "LOSS_LOG_COLUMNS",
    "LossRecord",
    "Trainer",
    "TrainingError",
    "TrainingExample",
    "TrainingSummary",
]
