"""Building blocks over time-major ``[L x C]`` sequences."""

import numpy as np

from .. import autodiff as ad
from ..autodiff import SeqTensor, ShapeError
from .base import Module, xavier_uniform


class PointwiseConv(Module):
    """Kernel-size-1 convolution (a per-frame affine map)."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.weight = self.add_parameter("weight", xavier_uniform(rng, in_channels, out_channels))
        self.bias = self.add_parameter("bias", np.zeros(out_channels))

    def forward(self, x: SeqTensor) -> SeqTensor:
        return ad.pointwise_conv1d(x, self.weight, self.bias)


class DepthwiseSeparableConv(Module):
    """Dilated depthwise convolution followed by a pointwise channel mix."""

    def __init__(self, channels: int, window: int, rng: np.random.Generator, dilation: int = 1):
        super().__init__()
        self.window = window
        self.dilation = dilation
        self.kernel = self.add_parameter("kernel", xavier_uniform(rng, window, window, shape=(window, channels)))
        self.mix = self.add_child("mix", PointwiseConv(channels, channels, rng))

    def forward(self, x: SeqTensor) -> SeqTensor:
        return self.mix(ad.depthwise_conv1d(x, self.kernel, self.dilation))


class InstanceNorm(Module):
    def __init__(self, channels: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gain = self.add_parameter("gain", np.ones(channels))
        self.bias = self.add_parameter("bias", np.zeros(channels))

    def forward(self, x: SeqTensor) -> SeqTensor:
        return ad.instance_norm_time(x, self.gain, self.bias, self.eps)


class FeedForward(Module):
    """Two pointwise layers with a ReLU in between."""

    def __init__(self, channels: int, expansion: int, rng: np.random.Generator):
        super().__init__()
        self.expand = self.add_child("expand", PointwiseConv(channels, channels * expansion, rng))
        self.project = self.add_child("project", PointwiseConv(channels * expansion, channels, rng))

    def forward(self, x: SeqTensor) -> SeqTensor:
        return self.project(ad.relu(self.expand(x)))


def mask_frames(features: SeqTensor, mask: np.ndarray) -> SeqTensor:
    """Multiply every frame of ``features`` by its 0/1 mask value."""
    values = np.asarray(mask, dtype=np.float64).reshape(-1, 1)
    if values.shape[0] != features.shape[0]:
        raise ShapeError(f"Mask covers {values.shape[0]} frames but features have {features.shape[0]}")
    return ad.mul(features, values.astype(features.dtype))
