"""Time-major dense tensors with a reverse-mode computation record."""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np

from ..utils.logging import get_logger


MAX_RANK = 3

logger = get_logger(__name__)


class AutodiffError(Exception):
    """Base class for tensor engine failures."""
    pass


class ShapeError(AutodiffError, ValueError):
    """Raised when operand dimensions do not line up."""
    pass


class OpConfigError(AutodiffError, ValueError):
    """Raised when an operation is configured with invalid constants (even windows, bad eps)."""
    pass


class TensorValidationError(AutodiffError):
    """Raised when a tensor holds NaN or Inf values."""
    pass


# Grad mode and default dtype are per thread so independent models can run side by side.
_mode = threading.local()
_tensor_ids = itertools.count()

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
ArrayLike = Union[np.ndarray, float, int, Sequence]


def is_grad_enabled() -> bool:
    return getattr(_mode, "grad_enabled", True)


def default_dtype() -> np.dtype:
    return getattr(_mode, "dtype", np.dtype(np.float64))


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable recording of operations inside the block."""
    previous = is_grad_enabled()
    _mode.grad_enabled = False
    try:
        yield
    finally:
        _mode.grad_enabled = previous


@contextmanager
def inference_mode(fp32: bool = False) -> Iterator[None]:
    """No recording, and 32-bit data for newly created tensors when ``fp32`` is set."""
    previous_dtype = default_dtype()
    _mode.dtype = np.dtype(np.float32 if fp32 else np.float64)
    try:
        with no_grad():
            yield
    finally:
        _mode.dtype = previous_dtype


@dataclass(eq=False)
class RecordNode:
    """One applied operation: its inputs, its output and the rule that differentiates it."""

    rule: str
    inputs: tuple["SeqTensor", ...]
    output_id: int
    backward: BackwardFn

    @property
    def input_ids(self) -> tuple[int, ...]:
        return tuple(t.id for t in self.inputs)


class ComputationRecord:
    """Ordered list of operation nodes leading to one output."""

    def __init__(self, nodes: list[RecordNode]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: "SeqTensor") -> "ComputationRecord":
        """Collect every node reachable from ``output`` in topological order."""
        ordered: list[RecordNode] = []
        visited: set[int] = set()
        stack: list[tuple[SeqTensor, bool]] = [(output, False)]

        while stack:
            tensor, expanded = stack.pop()
            node = tensor._node
            if node is None:
                continue
            if expanded:
                ordered.append(node)
                continue
            if tensor.id in visited:
                continue
            visited.add(tensor.id)
            stack.append((tensor, True))
            for parent in reversed(node.inputs):
                if parent._node is not None and parent.id not in visited:
                    stack.append((parent, False))

        return cls(ordered)

    def is_topological(self) -> bool:
        """True when every node's recorded inputs are produced earlier in the list."""
        position = {node.output_id: i for i, node in enumerate(self.nodes)}
        for i, node in enumerate(self.nodes):
            for input_id in node.input_ids:
                if input_id in position and position[input_id] >= i:
                    return False
        return True

    def rules(self) -> list[str]:
        return [node.rule for node in self.nodes]

    def __len__(self) -> int:
        return len(self.nodes)


class SeqTensor:
    """Rank-3-or-lower real tensor, laid out time first then channel."""

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[np.dtype] = None,
        copy: bool = True,
    ):
        array = np.array(data, dtype=dtype or default_dtype(), copy=True if copy else None)
        if array.ndim > MAX_RANK:
            raise ShapeError(f"SeqTensor rank must be <= {MAX_RANK}, got shape {array.shape}")
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.id = next(_tensor_ids)
        self._node: Optional[RecordNode] = None

    @classmethod
    def wrap(cls, array: np.ndarray) -> "SeqTensor":
        """Wrap an op result without copying it."""
        if array.dtype.kind != "f":
            array = array.astype(default_dtype())
        return cls(array, copy=False, dtype=array.dtype)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "SeqTensor":
        return SeqTensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def validate(self) -> "SeqTensor":
        """Raise TensorValidationError when the data holds NaN or Inf."""
        finite = np.isfinite(self.data)
        if not finite.all():
            bad = int(finite.size - np.count_nonzero(finite))
            raise TensorValidationError(
                f"Tensor {self.name or self.id} has {bad} non-finite values (shape {self.shape})"
            )
        if self.grad is not None and self.grad.shape != self.data.shape:
            raise TensorValidationError(
                f"Gradient shape {self.grad.shape} does not match data shape {self.shape}"
            )
        return self

    def record(self) -> ComputationRecord:
        return ComputationRecord.from_output(self)

    def backward(self, grad: Optional[ArrayLike] = None) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every leaf that requires grad."""
        if grad is None:
            if self.size != 1:
                raise ShapeError(f"backward() without a seed needs a scalar output, got shape {self.shape}")
            seed = np.ones_like(self.data)
        else:
            seed = np.asarray(grad, dtype=self.data.dtype)
            if seed.shape != self.shape:
                raise ShapeError(f"Seed gradient shape {seed.shape} does not match {self.shape}")

        if self._node is None:
            if self.requires_grad:
                self._accumulate(seed)
            return

        record = ComputationRecord.from_output(self)
        pending: dict[int, np.ndarray] = {self.id: seed}

        for node in reversed(record.nodes):
            upstream = pending.pop(node.output_id, None)
            if upstream is None:
                continue
            input_grads = node.backward(upstream)
            for tensor, input_grad in zip(node.inputs, input_grads):
                if input_grad is None or not tensor.requires_grad:
                    continue
                if tensor._node is None:
                    tensor._accumulate(input_grad)
                elif tensor.id in pending:
                    pending[tensor.id] = pending[tensor.id] + input_grad
                else:
                    pending[tensor.id] = input_grad

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = np.asarray(grad, dtype=self.data.dtype).reshape(self.shape)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def __add__(self, other):
        from .ops import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub
        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from .ops import scale
        return scale(self, -1.0)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"SeqTensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{label})"


def as_tensor(value: Union[SeqTensor, ArrayLike]) -> SeqTensor:
    if isinstance(value, SeqTensor):
        return value
    return SeqTensor(value)


def record_op(
    result: np.ndarray,
    inputs: tuple[SeqTensor, ...],
    rule: str,
    backward: BackwardFn,
) -> SeqTensor:
    """Wrap an op result and, when any input needs gradients, attach its record node."""
    output = SeqTensor.wrap(result)
    if output.ndim > MAX_RANK:
        raise ShapeError(f"{rule} produced rank {output.ndim} output")
    if is_grad_enabled() and any(t.requires_grad for t in inputs):
        output.requires_grad = True
        output._node = RecordNode(rule=rule, inputs=inputs, output_id=output.id, backward=backward)
    return output
