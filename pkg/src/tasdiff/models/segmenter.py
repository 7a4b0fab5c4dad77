"""Encoder + decoder pair and its denoiser view for sampling."""

from typing import Callable, Optional, Union

import numpy as np

from .. import autodiff as ad
from ..autodiff import SeqTensor
from ..config.schema import RunConfig
from .base import Module
from .decoder import Decoder
from .encoder import TDPEncoder


Denoiser = Callable[[np.ndarray, int], np.ndarray]


class Segmenter(Module):
    """TDP encoder producing the condition and the decoder predicting ``P_s`` from it."""

    def __init__(self, config: RunConfig, num_classes: Optional[int] = None, seed: Optional[int] = None):
        super().__init__()
        self.config = config
        self.num_classes = num_classes or config.dataset.num_classes
        rng = np.random.default_rng(config.seed if seed is None else seed)
        self.encoder = self.add_child("encoder", TDPEncoder(config.encoder, rng))
        self.decoder = self.add_child("decoder", Decoder(config.decoder, self.num_classes, rng))

    def encode(self, features: Union[SeqTensor, np.ndarray]) -> SeqTensor:
        return self.encoder(features)

    def decode(
        self,
        noisy: Union[SeqTensor, np.ndarray],
        step: int,
        cond: SeqTensor,
        mask: Optional[np.ndarray] = None,
    ) -> SeqTensor:
        return self.decoder(noisy, step, cond, mask)

    def forward(self, features, noisy, step: int, mask: Optional[np.ndarray] = None) -> SeqTensor:
        return self.decode(noisy, step, self.encode(features), mask)

    def as_denoiser(self, features: np.ndarray) -> Denoiser:
        """Encode once and return ``(Y_s, s) -> P_s`` under the all-ones mask."""
        dtype = next(iter(self.parameters().values())).dtype
        fp32 = dtype == np.float32
        with ad.inference_mode(fp32):
            cond = self.encode(SeqTensor(features, dtype=dtype))

        def denoise(noisy: np.ndarray, step: int) -> np.ndarray:
            with ad.inference_mode(fp32):
                return self.decode(SeqTensor(noisy, dtype=dtype), step, cond).data

        return denoise
