from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from cgebd.utils.errors import ShapeError

Tensor = npt.NDArray[np.float64]


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Named, seeded generator: the same (seed, stream) always yields the same draws."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


@dataclass
class Parameter:
    """A trainable tensor with its gradient and momentum buffers."""

    value: Tensor
    grad: Tensor
    velocity: Tensor

    @classmethod
    def of(cls, value: Tensor) -> "Parameter":
        value = np.asarray(value, dtype=np.float64)
        return cls(value=value, grad=np.zeros_like(value), velocity=np.zeros_like(value))


class ParamSet:
    """
    Ordered, uniquely named parameters.

    Insertion order is the canonical order for initialization, optimizer
    updates and checkpoints, so a fixed seed gives bit-identical parameters.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._rng = make_rng(seed, 0)
        self._params: Dict[str, Parameter] = {}

    def add(
        self, name: str, shape: Sequence[int], fan_in: Optional[int] = None, fill: float = 0.0
    ) -> Tensor:
        """
        Register a parameter.

        With ``fan_in`` the values are drawn uniformly from +-sqrt(6 / fan_in);
        without it every entry starts at ``fill`` (biases).
        """
        if name in self._params:
            raise ValueError(f"Duplicate parameter name: {name}")

        shape = tuple(int(s) for s in shape)
        if fan_in is None:
            value = np.full(shape, fill, dtype=np.float64)
        else:
            bound = np.sqrt(6.0 / max(fan_in, 1))
            value = self._rng.uniform(-bound, bound, size=shape)

        self._params[name] = Parameter.of(value)
        return self._params[name].value

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name].value

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterator[Tuple[str, Parameter]]:
        return iter(self._params.items())

    def parameter(self, name: str) -> Parameter:
        return self._params[name]

    def accumulate(self, name: str, grad: Tensor) -> None:
        param = self._params[name]
        if grad.shape != param.value.shape:
            raise ShapeError(
                f"Gradient for {name} has shape {grad.shape}, expected {param.value.shape}"
            )
        param.grad += grad

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.grad.fill(0.0)

    def scale_grad(self, factor: float) -> None:
        for param in self._params.values():
            param.grad *= factor

    def num_values(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def state_dict(self) -> Dict[str, Tensor]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: Dict[str, Tensor]) -> None:
        missing = set(self._params) - set(state)
        unexpected = set(state) - set(self._params)
        if missing or unexpected:
            raise ShapeError(
                f"Parameter mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}"
            )
        for name, value in state.items():
            param = self._params[name]
            if value.shape != param.value.shape:
                raise ShapeError(
                    f"Parameter {name} has shape {value.shape}, expected {param.value.shape}"
                )
            param.value[...] = value
            param.velocity.fill(0.0)
            param.grad.fill(0.0)
