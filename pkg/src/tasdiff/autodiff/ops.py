"""Differentiable operations over SeqTensor.

Every op computes its forward result with numpy and registers a backward rule named
after the op. Layouts are time-major: ``[L x C]`` unless stated otherwise.
"""

from __future__ import annotations

import math
from typing import Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import OpConfigError, SeqTensor, ShapeError, as_tensor, record_op
from ..utils.logging import get_logger


logger = get_logger(__name__)

Operand = Union[SeqTensor, np.ndarray, float, int]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _require_rank(x: SeqTensor, rank: int, op: str) -> None:
    if x.ndim != rank:
        raise ShapeError(f"{op} expects a rank-{rank} tensor, got shape {x.shape}")


def _require_odd_window(w: int, op: str) -> None:
    if w < 1 or w % 2 == 0:
        raise OpConfigError(f"{op} needs an odd positive window, got {w}")


# Elementwise arithmetic

def add(a: Operand, b: Operand) -> SeqTensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError as e:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from e
    return record_op(out, (a, b), "add", lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Operand, b: Operand) -> SeqTensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data - b.data
    except ValueError as e:
        raise ShapeError(f"sub: cannot broadcast {a.shape} with {b.shape}") from e
    return record_op(out, (a, b), "sub", lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Operand, b: Operand) -> SeqTensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError as e:
        raise ShapeError(f"mul: cannot broadcast {a.shape} with {b.shape}") from e
    return record_op(
        out, (a, b), "mul",
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scale(x: SeqTensor, factor: float) -> SeqTensor:
    return record_op(x.data * factor, (x,), "scale", lambda g: (g * factor,))


def add_scalar(x: SeqTensor, value: float) -> SeqTensor:
    return record_op(x.data + value, (x,), "add_scalar", lambda g: (g,))


def relu(x: SeqTensor) -> SeqTensor:
    positive = x.data > 0
    return record_op(np.where(positive, x.data, 0.0), (x,), "relu", lambda g: (g * positive,))


def log(x: SeqTensor) -> SeqTensor:
    with np.errstate(divide="ignore"):
        out = np.log(x.data)
    return record_op(out, (x,), "log", lambda g: (g / x.data,))


def clamp(x: SeqTensor, low: Optional[float] = None, high: Optional[float] = None) -> SeqTensor:
    """Clip values; the gradient passes only where the input lies inside [low, high]."""
    if low is None and high is None:
        raise OpConfigError("clamp needs at least one bound")
    out = np.clip(x.data, low, high)
    inside = np.ones(x.shape, dtype=bool)
    if low is not None:
        inside &= x.data >= low
    if high is not None:
        inside &= x.data <= high
    return record_op(out, (x,), "clamp", lambda g: (g * inside,))


def square(x: SeqTensor) -> SeqTensor:
    return record_op(x.data * x.data, (x,), "square", lambda g: (2.0 * g * x.data,))


# Reductions and reshaping

def sum_all(x: SeqTensor) -> SeqTensor:
    return record_op(np.asarray(x.data.sum()), (x,), "sum_all", lambda g: (np.broadcast_to(g, x.shape).copy(),))


def mean_all(x: SeqTensor) -> SeqTensor:
    n = x.size
    return record_op(
        np.asarray(x.data.mean()), (x,), "mean_all",
        lambda g: (np.broadcast_to(g / n, x.shape).copy(),),
    )


def sum_channels(x: SeqTensor) -> SeqTensor:
    """Row sums: ``[L x C] -> [L x 1]``."""
    _require_rank(x, 2, "sum_channels")
    return record_op(
        x.data.sum(axis=1, keepdims=True), (x,), "sum_channels",
        lambda g: (np.broadcast_to(g, x.shape).copy(),),
    )


def matmul(a: SeqTensor, b: SeqTensor) -> SeqTensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_rank(a, 2, "matmul")
    _require_rank(b, 2, "matmul")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    return record_op(a.data @ b.data, (a, b), "matmul", lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(x: SeqTensor) -> SeqTensor:
    _require_rank(x, 2, "transpose")
    return record_op(x.data.T.copy(), (x,), "transpose", lambda g: (g.T,))


def slice_time(x: SeqTensor, start: int, stop: int) -> SeqTensor:
    length = x.shape[0]

    def backward(g: np.ndarray):
        full = np.zeros_like(x.data)
        full[start:stop] = g
        return (full,)

    if not 0 <= start <= stop <= length:
        raise ShapeError(f"slice_time: [{start}, {stop}) outside length {length}")
    return record_op(x.data[start:stop].copy(), (x,), "slice_time", backward)


def concat_channels(a: SeqTensor, b: SeqTensor) -> SeqTensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_rank(a, 2, "concat_channels")
    _require_rank(b, 2, "concat_channels")
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_channels: lengths differ, {a.shape[0]} vs {b.shape[0]}")
    split = a.shape[1]
    return record_op(
        np.concatenate([a.data, b.data], axis=1), (a, b), "concat_channels",
        lambda g: (g[:, :split], g[:, split:]),
    )


def broadcast_time(x: SeqTensor, length: int) -> SeqTensor:
    """Repeat a single frame ``[1 x C]`` to ``[length x C]``."""
    _require_rank(x, 2, "broadcast_time")
    if x.shape[0] != 1:
        raise ShapeError(f"broadcast_time expects one frame, got {x.shape}")
    return record_op(
        np.repeat(x.data, length, axis=0), (x,), "broadcast_time",
        lambda g: (g.sum(axis=0, keepdims=True),),
    )


# Sequence layers

def linear(x: SeqTensor, weight: SeqTensor, bias: SeqTensor, rule: str = "linear") -> SeqTensor:
    """``y[t] = x[t] . W + b`` for every frame."""
    _require_rank(x, 2, rule)
    _require_rank(weight, 2, rule)
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(f"{rule}: input width {x.shape[1]} does not match weight {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise ShapeError(f"{rule}: bias shape {bias.shape} does not match output width {weight.shape[1]}")
    return record_op(
        x.data @ weight.data + bias.data, (x, weight, bias), rule,
        lambda g: (g @ weight.data.T, x.data.T @ g, g.sum(axis=0)),
    )


def pointwise_conv1d(x: SeqTensor, weight: SeqTensor, bias: SeqTensor) -> SeqTensor:
    """Kernel-size-1 convolution; identical to ``linear`` applied per frame."""
    return linear(x, weight, bias, rule="pointwise_conv1d")


def depthwise_conv1d(x: SeqTensor, kernel: SeqTensor, dilation: int = 1) -> SeqTensor:
    """Per-channel dilated convolution with zero "same" padding.

    ``kernel`` is ``[w x C]`` with odd ``w``; the receptive field is ``(w - 1) * dilation + 1``.
    """
    _require_rank(x, 2, "depthwise_conv1d")
    _require_rank(kernel, 2, "depthwise_conv1d")
    width, channels = kernel.shape
    _require_odd_window(width, "depthwise_conv1d")
    if dilation < 1:
        raise OpConfigError(f"depthwise_conv1d dilation must be >= 1, got {dilation}")
    if channels != x.shape[1]:
        raise ShapeError(f"depthwise_conv1d: kernel channels {channels} != input channels {x.shape[1]}")

    length = x.shape[0]
    pad = dilation * (width - 1) // 2
    padded = np.pad(x.data, ((pad, pad), (0, 0)))
    out = np.zeros_like(x.data)
    for j in range(width):
        offset = j * dilation
        out += kernel.data[j] * padded[offset:offset + length]

    def backward(g: np.ndarray):
        grad_padded = np.zeros_like(padded)
        grad_kernel = np.empty_like(kernel.data)
        for j in range(width):
            offset = j * dilation
            grad_padded[offset:offset + length] += kernel.data[j] * g
            grad_kernel[j] = (padded[offset:offset + length] * g).sum(axis=0)
        return grad_padded[pad:pad + length], grad_kernel

    return record_op(out, (x, kernel), "depthwise_conv1d", backward)


def maxpool1d_same(x: SeqTensor, window: int) -> SeqTensor:
    """Stride-1 max pooling over time with -inf "same" padding.

    Ties route the gradient to the earliest frame in the window.
    """
    _require_rank(x, 2, "maxpool1d_same")
    _require_odd_window(window, "maxpool1d_same")

    length, channels = x.shape
    pad = (window - 1) // 2
    padded = np.pad(x.data, ((pad, pad), (0, 0)), constant_values=-np.inf)
    windows = sliding_window_view(padded, window, axis=0)  # [L, C, window]
    first_max = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, first_max[..., None], axis=-1)[..., 0]

    def backward(g: np.ndarray):
        grad_padded = np.zeros_like(padded)
        rows = np.arange(length)[:, None] + first_max
        cols = np.broadcast_to(np.arange(channels), (length, channels))
        np.add.at(grad_padded, (rows, cols), g)
        return (grad_padded[pad:pad + length],)

    return record_op(out.copy(), (x,), "maxpool1d_same", backward)


def global_avgpool_time(x: SeqTensor) -> SeqTensor:
    """Per-channel mean over time: ``[L x C] -> [1 x C]``."""
    _require_rank(x, 2, "global_avgpool_time")
    length = x.shape[0]
    return record_op(
        x.data.mean(axis=0, keepdims=True), (x,), "global_avgpool_time",
        lambda g: (np.broadcast_to(g / length, x.shape).copy(),),
    )


def instance_norm_time(x: SeqTensor, gain: SeqTensor, bias: SeqTensor, eps: float = 1e-5) -> SeqTensor:
    """Standardize each channel over time, then apply ``gain`` and ``bias``.

    A single frame has no variance to normalize by; the output is then just ``bias``.
    """
    _require_rank(x, 2, "instance_norm_time")
    if eps <= 0:
        raise OpConfigError(f"instance_norm_time eps must be positive, got {eps}")
    length, channels = x.shape
    if gain.shape != (channels,) or bias.shape != (channels,):
        raise ShapeError(f"instance_norm_time: gain/bias must have shape ({channels},)")

    if length == 1:
        logger.warning("Instance norm received a single frame; returning bias", channels=channels)
        return record_op(
            bias.data[None, :].copy(), (x, gain, bias), "instance_norm_time",
            lambda g: (np.zeros_like(x.data), np.zeros_like(gain.data), g.sum(axis=0)),
        )

    centered = x.data - x.data.mean(axis=0, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=0, keepdims=True) + eps)
    normalized = centered * inv_std
    out = gain.data * normalized + bias.data

    def backward(g: np.ndarray):
        grad_norm = g * gain.data
        grad_x = (inv_std / length) * (
            length * grad_norm
            - grad_norm.sum(axis=0, keepdims=True)
            - normalized * (grad_norm * normalized).sum(axis=0, keepdims=True)
        )
        return grad_x, (g * normalized).sum(axis=0), g.sum(axis=0)

    return record_op(out, (x, gain, bias), "instance_norm_time", backward)


def softmax_channels(x: SeqTensor) -> SeqTensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)
    return record_op(
        probs, (x,), "softmax_channels",
        lambda g: (probs * (g - (g * probs).sum(axis=-1, keepdims=True)),),
    )


def log_softmax_channels(x: SeqTensor) -> SeqTensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return record_op(
        out, (x,), "log_softmax_channels",
        lambda g: (g - np.exp(out) * g.sum(axis=-1, keepdims=True),),
    )


def scaled_dot_attention(q: SeqTensor, k: SeqTensor, v: SeqTensor) -> SeqTensor:
    """``softmax(Q K^T / sqrt(H)) V`` with queries ``[L x H]`` and keys/values ``[L' x H]``."""
    for name, t in (("Q", q), ("K", k), ("V", v)):
        _require_rank(t, 2, f"scaled_dot_attention {name}")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"scaled_dot_attention: query width {q.shape[1]} != key width {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ShapeError(f"scaled_dot_attention: {k.shape[0]} keys but {v.shape[0]} values")

    factor = 1.0 / math.sqrt(q.shape[1])
    scores = (q.data @ k.data.T) * factor
    scores -= scores.max(axis=1, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=1, keepdims=True)
    out = weights @ v.data

    def backward(g: np.ndarray):
        grad_weights = g @ v.data.T
        grad_scores = weights * (grad_weights - (grad_weights * weights).sum(axis=1, keepdims=True))
        grad_scores *= factor
        return grad_scores @ k.data, grad_scores.T @ q.data, weights.T @ g

    return record_op(out, (q, k, v), "scaled_dot_attention", backward)


def slice_channels(x: SeqTensor, start: int, stop: int) -> SeqTensor:
    _require_rank(x, 2, "slice_channels")
    width = x.shape[1]

    def backward(g: np.ndarray):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        return (full,)

    if not 0 <= start <= stop <= width:
        raise ShapeError(f"slice_channels: [{start}, {stop}) outside width {width}")
    return record_op(x.data[:, start:stop].copy(), (x,), "slice_channels", backward)
