"""Encoder, decoder and the layers they are built from."""

from .base import Module, xavier_uniform
from .layers import DepthwiseSeparableConv, FeedForward, InstanceNorm, PointwiseConv, mask_frames
from .encoder import (
    AttentionStack,
    RankDiagnostic,
    TDPEncoder,
    TDPLayer,
    dilation_receptive_radius,
    numeric_rank,
    rank_diagnostic,
)
from .decoder import Decoder, DecoderBlock, StepEmbedding, sinusoidal_embedding
from .segmenter import Denoiser, Segmenter

__all__ = [
    "Module",
    "xavier_uniform",

    "DepthwiseSeparableConv",
    "FeedForward",
    "InstanceNorm",
    "PointwiseConv",
    "mask_frames",

    "AttentionStack",
    "RankDiagnostic",
    "TDPEncoder",
    "TDPLayer",
    "dilation_receptive_radius",
    "numeric_rank",
    "rank_diagnostic",

    "Decoder",
    "DecoderBlock",
    "StepEmbedding",
    "sinusoidal_embedding",

    "Denoiser",
    "Segmenter",
]
