"""Diffusion-based temporal action segmentation with a TDP encoder and adaptive skip sampling."""

__version__ = "1.0.0"
