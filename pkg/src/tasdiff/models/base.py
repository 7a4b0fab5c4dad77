"""Parameter container shared by the encoder, decoder and their layers."""

from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from ..autodiff import SeqTensor, ShapeError
from ..utils.logging import LoggerMixin


class Module(LoggerMixin):
    """Owns named parameters and child modules.

    Parameter names are dotted paths (``layers.0.norm.gain``), which is also how they are
    keyed in checkpoints.
    """

    def __init__(self):
        self._parameters: Dict[str, SeqTensor] = {}
        self._children: Dict[str, "Module"] = {}

    def add_parameter(self, name: str, value: np.ndarray) -> SeqTensor:
        if name in self._parameters or name in self._children:
            raise ValueError(f"{self.__class__.__name__} already has a member named {name!r}")
        tensor = SeqTensor(value, requires_grad=True, name=name)
        self._parameters[name] = tensor
        return tensor

    def add_child(self, name: str, module: "Module") -> "Module":
        if name in self._parameters or name in self._children:
            raise ValueError(f"{self.__class__.__name__} already has a member named {name!r}")
        self._children[name] = module
        return module

    def add_children(self, name: str, modules: List["Module"]) -> List["Module"]:
        for index, module in enumerate(modules):
            self.add_child(f"{name}.{index}", module)
        return modules

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, SeqTensor]]:
        for name, tensor in self._parameters.items():
            yield prefix + name, tensor
        for name, child in self._children.items():
            yield from child.named_parameters(prefix=f"{prefix}{name}.")

    def parameters(self) -> Dict[str, SeqTensor]:
        return dict(self.named_parameters())

    def zero_grad(self) -> None:
        for _, tensor in self.named_parameters():
            tensor.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        """Copy arrays into the existing parameters; shapes must match exactly."""
        params = self.parameters()
        if strict:
            missing = sorted(set(params) - set(state))
            unexpected = sorted(set(state) - set(params))
            if missing or unexpected:
                raise KeyError(f"State mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, tensor in params.items():
            if name not in state:
                continue
            value = np.asarray(state[name])
            if value.shape != tensor.shape:
                raise ShapeError(f"Parameter {name}: expected shape {tensor.shape}, got {value.shape}")
            tensor.data = value.astype(tensor.dtype, copy=True)

    def cast(self, dtype: np.dtype) -> "Module":
        """Convert every parameter to ``dtype`` in place."""
        for _, tensor in self.named_parameters():
            tensor.data = tensor.data.astype(dtype)
            tensor.grad = None
        return self

    def count_parameters(self) -> int:
        return sum(tensor.size for _, tensor in self.named_parameters())

    def storage_bytes(self) -> int:
        return sum(tensor.data.nbytes for _, tensor in self.named_parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape: Optional[tuple] = None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))
