"""Named parameter storage with gradient slots."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ..errors import ConfigurationError, DimensionError


@dataclass
class Param:
    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)

    def __post_init__(self):
        self.value = np.array(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)


class ParamStore:
    """Insertion-ordered collection of :class:`Param` addressed by name.

    ``store[name]`` returns the value array; gradients are reached through
    :meth:`grad` and updated with :meth:`accumulate`.
    """

    def __init__(self, params=None):
        self._params: dict[str, Param] = {}
        for name, value in (params or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> Param:
        if name in self._params:
            raise ConfigurationError(f"duplicate parameter name {name!r}")
        p = Param(name, value)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> np.ndarray:
        return self._params[name].value

    def __setitem__(self, name: str, value) -> None:
        p = self._params[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != p.value.shape:
            raise DimensionError(
                f"parameter {name!r}: cannot assign shape {value.shape} to {p.value.shape}"
            )
        p.value = value.copy()

    def __contains__(self, name) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def params(self) -> Iterator[Param]:
        return iter(self._params.values())

    def param(self, name: str) -> Param:
        return self._params[name]

    def grad(self, name: str) -> np.ndarray:
        return self._params[name].grad

    def accumulate(self, name: str, g) -> None:
        p = self._params[name]
        p.grad += g

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def size(self) -> int:
        """Total number of scalar parameters."""
        return sum(p.value.size for p in self._params.values())

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for p in self._params.values():
            out.add(p.name, p.value.copy())
        return out

    def to_dict(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def grads(self) -> dict[str, np.ndarray]:
        return {name: p.grad.copy() for name, p in self._params.items()}

    def equals(self, other: "ParamStore") -> bool:
        """Bitwise equality of names, shapes and values."""
        if self.names() != other.names():
            return False
        return all(
            np.array_equal(self[n], other[n]) and self[n].dtype == other[n].dtype
            for n in self
        )

    def __repr__(self) -> str:
        return f"ParamStore({len(self)} tensors, {self.size()} scalars)"
