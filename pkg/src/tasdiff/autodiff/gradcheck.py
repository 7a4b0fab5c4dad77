"""Central finite-difference checks for analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .ops import mul, sum_all
from .tensor import SeqTensor, no_grad


@dataclass
class GradCheckResult:
    relative_errors: list[float]

    @property
    def max_relative_error(self) -> float:
        return max(self.relative_errors, default=0.0)

    def passed(self, tolerance: float = 1e-4) -> bool:
        return self.max_relative_error <= tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise relative error, zero when both gradients vanish."""
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(
    fn: Callable[..., SeqTensor],
    inputs: Sequence[SeqTensor],
    h: float = 1e-5,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckResult:
    """Compare backward() against central differences of a random projection of ``fn``.

    ``inputs`` must be 64-bit leaf tensors; each one with ``requires_grad`` is checked.
    """
    rng = rng or np.random.default_rng(0)
    with no_grad():
        out_shape = fn(*inputs).shape
    projection = SeqTensor(rng.standard_normal(out_shape))

    for t in inputs:
        t.zero_grad()
    sum_all(mul(fn(*inputs), projection)).backward()

    def objective() -> float:
        with no_grad():
            return float((fn(*inputs).data * projection.data).sum())

    errors = []
    for t in inputs:
        if not t.requires_grad:
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        numeric_flat = numeric.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = objective()
            flat[i] = original - h
            minus = objective()
            flat[i] = original
            numeric_flat[i] = (plus - minus) / (2.0 * h)
        errors.append(relative_error(analytic, numeric))

    return GradCheckResult(relative_errors=errors)
