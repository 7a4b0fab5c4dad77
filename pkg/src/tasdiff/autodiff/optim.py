"""Adam optimizer over named SeqTensor parameters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .tensor import SeqTensor, ShapeError
from ..utils.logging import LoggerMixin


DEFAULT_BETAS = (0.9, 0.999)
DEFAULT_EPS = 1e-8


@dataclass
class AdamState:
    """First/second moment estimates and the number of updates applied so far."""

    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(step=0, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = DEFAULT_BETAS,
    eps: float = DEFAULT_EPS,
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched; new arrays are returned."""
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError(
            f"adam_step: {len(params)} params, {len(grads)} grads, {len(state.m)}/{len(state.v)} moments"
        )
    for i, (p, g, m, v) in enumerate(zip(params, grads, state.m, state.v)):
        if not (p.shape == g.shape == m.shape == v.shape):
            raise ShapeError(f"adam_step: shape mismatch at parameter {i}: {p.shape}, {g.shape}, {m.shape}, {v.shape}")

    beta1, beta2 = betas
    step = state.step + 1
    correction1 = 1.0 - beta1 ** step
    correction2 = 1.0 - beta2 ** step

    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)

    return new_params, AdamState(step=step, m=new_m, v=new_v)


class Adam(LoggerMixin):
    """Stateful wrapper applying ``adam_step`` to a dict of named parameters in place."""

    def __init__(
        self,
        params: Mapping[str, SeqTensor],
        lr: float = 5e-4,
        betas: tuple[float, float] = DEFAULT_BETAS,
        eps: float = DEFAULT_EPS,
    ):
        self.params = dict(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState.zeros_like([p.data for p in self.params.values()])

    @property
    def step_count(self) -> int:
        return self.state.step

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        values = [p.data for p in self.params.values()]
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params.values()]
        updated, self.state = adam_step(values, grads, self.state, self.lr, self.betas, self.eps)
        for p, new in zip(self.params.values(), updated):
            p.data[...] = new

    def state_dict(self) -> dict:
        names = list(self.params)
        return {
            "step": self.state.step,
            "m": dict(zip(names, self.state.m)),
            "v": dict(zip(names, self.state.v)),
        }

    def load_state_dict(self, state: Mapping) -> None:
        names = list(self.params)
        missing = [n for n in names if n not in state["m"] or n not in state["v"]]
        if missing:
            raise ShapeError(f"Optimizer state is missing moments for {missing}")
        self.state = AdamState(
            step=int(state["step"]),
            m=[np.array(state["m"][n], dtype=self.params[n].dtype) for n in names],
            v=[np.array(state["v"][n], dtype=self.params[n].dtype) for n in names],
        )
        for name, m in zip(names, self.state.m):
            if m.shape != self.params[name].shape:
                raise ShapeError(f"Optimizer moment for {name} has shape {m.shape}, expected {self.params[name].shape}")
        self.logger.debug("Optimizer state restored", step=self.state.step, parameters=len(names))
