"""Dense tensor arithmetic with reverse-mode differentiation."""

from .tensor import (
    AutodiffError,
    ComputationRecord,
    OpConfigError,
    RecordNode,
    SeqTensor,
    ShapeError,
    TensorValidationError,
    as_tensor,
    default_dtype,
    inference_mode,
    is_grad_enabled,
    no_grad,
)

from .ops import (
    add,
    add_scalar,
    broadcast_time,
    clamp,
    concat_channels,
    depthwise_conv1d,
    global_avgpool_time,
    instance_norm_time,
    linear,
    log,
    log_softmax_channels,
    matmul,
    maxpool1d_same,
    mean_all,
    mul,
    pointwise_conv1d,
    relu,
    scale,
    scaled_dot_attention,
    slice_channels,
    slice_time,
    softmax_channels,
    square,
    sub,
    sum_all,
    sum_channels,
    transpose,
)

from .optim import Adam, AdamState, adam_step
from .gradcheck import GradCheckResult, check_gradients, relative_error

__all__ = [
    # Tensor and record
    "SeqTensor",
    "ComputationRecord",
    "RecordNode",
    "as_tensor",
    "default_dtype",
    "inference_mode",
    "is_grad_enabled",
    "no_grad",

    # Errors
    "AutodiffError",
    "OpConfigError",
    "ShapeError",
    "TensorValidationError",

    # Operations
    "add",
    "add_scalar",
    "broadcast_time",
    "clamp",
    "concat_channels",
    "depthwise_conv1d",
    "global_avgpool_time",
    "instance_norm_time",
    "linear",
    "log",
    "log_softmax_channels",
    "matmul",
    "maxpool1d_same",
    "mean_all",
    "mul",
    "pointwise_conv1d",
    "relu",
    "scale",
    "scaled_dot_attention",
    "slice_channels",
    "slice_time",
    "softmax_channels",
    "square",
    "sub",
    "sum_all",
    "sum_channels",
    "transpose",

    # Optimization and checking
    "Adam",
    "AdamState",
    "adam_step",
    "GradCheckResult",
    "check_gradients",
    "relative_error",
]
