"""Configuration package for segmentation runs."""

from .schema import (
    AugmentationConfig,
    BenchConfig,
    DecoderConfig,
    DiffusionConfig,
    EncoderConfig,
    LoggingConfig,
    LossConfig,
    MaskingConfig,
    MaskKind,
    RunConfig,
    SamplerConfig,
    SyntheticGenConfig,
    TrainingConfig,
)

from .loader import (
    ConfigLoader,
    ConfigurationError,
    load_config,
)

__all__ = [
    "AugmentationConfig",
    "BenchConfig",
    "DecoderConfig",
    "DiffusionConfig",
    "EncoderConfig",
    "LoggingConfig",
    "LossConfig",
    "MaskingConfig",
    "MaskKind",
    "RunConfig",
    "SamplerConfig",
    "SyntheticGenConfig",
    "TrainingConfig",

    "ConfigLoader",
    "ConfigurationError",
    "load_config",
]
