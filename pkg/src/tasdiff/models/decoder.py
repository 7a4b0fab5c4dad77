"""Denoising decoder: ``P_s = g(Y_s, s, cond * M)``."""

from typing import List, Optional, Union

import numpy as np

from .. import autodiff as ad
from ..autodiff import SeqTensor, ShapeError
from ..config.schema import DecoderConfig
from .base import Module
from .layers import DepthwiseSeparableConv, FeedForward, InstanceNorm, PointwiseConv, mask_frames


def sinusoidal_embedding(steps: Union[int, np.ndarray], dim: int) -> np.ndarray:
    """Raw position encoding of diffusion steps, ``[n x dim]``.

    Even columns hold ``sin(s * f_i)`` and odd columns ``cos(s * f_i)`` with geometric
    frequencies ``f_i = 10000^(-2i/dim)``.
    """
    if dim < 2 or dim % 2:
        raise ValueError(f"Step embedding size must be even and >= 2, got {dim}")
    steps = np.atleast_1d(np.asarray(steps, dtype=np.float64))
    freqs = np.power(10000.0, -np.arange(dim // 2) * 2.0 / dim)
    angles = steps[:, None] * freqs[None, :]
    out = np.empty((steps.shape[0], dim))
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out


class StepEmbedding(Module):
    """Sinusoid of the step index followed by ``Linear -> ReLU -> Linear``."""

    def __init__(self, raw_dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.raw_dim = raw_dim
        self.first = self.add_child("first", PointwiseConv(raw_dim, hidden, rng))
        self.second = self.add_child("second", PointwiseConv(hidden, hidden, rng))

    def forward(self, steps: Union[int, np.ndarray]) -> SeqTensor:
        raw = SeqTensor(sinusoidal_embedding(steps, self.raw_dim))
        return self.second(ad.relu(self.first(raw)))


class DecoderBlock(Module):
    """Dilated separable conv, cross-attention on the condition, feedforward; all residual."""

    def __init__(self, hidden: int, window: int, dilation: int, heads: int, expansion: int,
                 eps: float, rng: np.random.Generator):
        super().__init__()
        self.heads = heads
        self.head_dim = hidden // heads
        self.conv_norm = self.add_child("conv_norm", InstanceNorm(hidden, eps))
        self.conv = self.add_child("conv", DepthwiseSeparableConv(hidden, window, rng, dilation=dilation))
        self.attn_norm = self.add_child("attn_norm", InstanceNorm(hidden, eps))
        self.query = self.add_child("query", PointwiseConv(hidden, hidden, rng))
        self.key = self.add_child("key", PointwiseConv(hidden, hidden, rng))
        self.value = self.add_child("value", PointwiseConv(hidden, hidden, rng))
        self.output = self.add_child("output", PointwiseConv(hidden, hidden, rng))
        self.ffn_norm = self.add_child("ffn_norm", InstanceNorm(hidden, eps))
        self.ffn = self.add_child("ffn", FeedForward(hidden, expansion, rng))

    def attend(self, h: SeqTensor, cond: SeqTensor) -> SeqTensor:
        q = self.query(self.attn_norm(h))
        k = self.key(cond)
        v = self.value(cond)
        if self.heads == 1:
            return self.output(ad.scaled_dot_attention(q, k, v))
        merged = None
        for head in range(self.heads):
            lo, hi = head * self.head_dim, (head + 1) * self.head_dim
            part = ad.scaled_dot_attention(
                ad.slice_channels(q, lo, hi), ad.slice_channels(k, lo, hi), ad.slice_channels(v, lo, hi)
            )
            merged = part if merged is None else ad.concat_channels(merged, part)
        return self.output(merged)

    def forward(self, h: SeqTensor, cond: SeqTensor) -> SeqTensor:
        h = ad.add(h, ad.relu(self.conv(self.conv_norm(h))))
        h = ad.add(h, self.attend(h, cond))
        return ad.add(h, self.ffn(self.ffn_norm(h)))


class Decoder(Module):
    """Maps a noisy label sequence, its step and the masked condition to class probabilities."""

    def __init__(self, config: DecoderConfig, num_classes: int, rng: np.random.Generator):
        super().__init__()
        if config.hidden is None:
            raise ValueError("Decoder width is unset; build it from a validated RunConfig")
        if num_classes < 2:
            raise ValueError(f"Decoder needs at least two classes, got {num_classes}")
        hidden = config.hidden
        self.config = config
        self.num_classes = num_classes
        self.hidden = hidden

        self.input_proj = self.add_child("input_proj", PointwiseConv(num_classes + hidden, hidden, rng))
        self.step_embedding = self.add_child(
            "step_embedding", StepEmbedding(config.step_embed_dim or hidden, hidden, rng)
        )
        self.blocks: List[DecoderBlock] = self.add_children("blocks", [
            DecoderBlock(hidden, config.window, dilation, config.heads, config.ffn_expansion, config.norm_eps, rng)
            for dilation in config.dilations
        ])
        self.head = self.add_child("head", PointwiseConv(hidden, num_classes, rng))

    def forward(
        self,
        noisy: Union[SeqTensor, np.ndarray],
        step: int,
        cond: SeqTensor,
        mask: Optional[np.ndarray] = None,
    ) -> SeqTensor:
        noisy = ad.as_tensor(noisy)
        if noisy.ndim != 2 or noisy.shape[1] != self.num_classes:
            raise ShapeError(f"Decoder expects [L x {self.num_classes}] labels, got {noisy.shape}")
        if cond.ndim != 2 or cond.shape[1] != self.hidden:
            raise ShapeError(f"Decoder expects [L x {self.hidden}] condition, got {cond.shape}")
        if noisy.shape[0] != cond.shape[0]:
            raise ShapeError(f"Label length {noisy.shape[0]} does not match condition length {cond.shape[0]}")

        if mask is not None:
            cond = mask_frames(cond, mask)

        length = noisy.shape[0]
        h = self.input_proj(ad.concat_channels(noisy, cond))
        h = ad.add(h, ad.broadcast_time(self.step_embedding(step), length))
        for block in self.blocks:
            h = block(h, cond)
        return ad.softmax_channels(self.head(h))
