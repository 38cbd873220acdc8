"""Minimal dense tensor type: explicit shape over flat row-major float32 storage.

Every buffer in the runtime (weights, activations, membrane state, frames)
is one of these. No broadcasting, no views beyond whole-tensor reshape;
callers address elements explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_RANK = 4


@dataclass(frozen=True)
class Shape:
    dims: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= len(self.dims) <= MAX_RANK:
            raise ValueError(f"shape rank must be 1..{MAX_RANK}, got {len(self.dims)}")
        for d in self.dims:
            if not isinstance(d, int) or d < 1:
                raise ValueError(f"shape extents must be positive integers, got {self.dims}")

    @property
    def numel(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    @property
    def strides(self) -> tuple[int, ...]:
        """Row-major strides in elements: stride[i] = product of trailing extents."""
        out = [1] * len(self.dims)
        for i in range(len(self.dims) - 2, -1, -1):
            out[i] = out[i + 1] * self.dims[i + 1]
        return tuple(out)

    def offset(self, index: tuple[int, ...]) -> int:
        if len(index) != len(self.dims):
            raise IndexError(f"index rank {len(index)} != shape rank {len(self.dims)}")
        flat = 0
        for i, (ix, d, s) in enumerate(zip(index, self.dims, self.strides)):
            if not 0 <= ix < d:
                raise IndexError(f"index {index} out of bounds for shape {self.dims} at axis {i}")
            flat += ix * s
        return flat


def shape_of(*dims: int) -> Shape:
    return Shape(tuple(dims))


@dataclass
class Tensor:
    shape: Shape
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32).reshape(-1)
        if self.data.size != self.shape.numel:
            raise ValueError(
                f"data length {self.data.size} != element count {self.shape.numel} "
                f"of shape {self.shape.dims}"
            )

    @classmethod
    def zeros(cls, shape: Shape) -> "Tensor":
        return cls(shape, np.zeros(shape.numel, dtype=np.float32))

    @classmethod
    def from_array(cls, arr) -> "Tensor":
        arr = np.asarray(arr, dtype=np.float32)
        return cls(shape_of(*arr.shape), arr.reshape(-1))

    @property
    def nd(self) -> np.ndarray:
        """The storage viewed with its declared shape (no copy)."""
        return self.data.reshape(self.shape.dims)

    def get(self, *index: int) -> float:
        return float(self.data[self.shape.offset(index)])

    def set(self, index: tuple[int, ...], value: float) -> None:
        self.data[self.shape.offset(index)] = value

    def copy(self) -> "Tensor":
        return Tensor(self.shape, self.data.copy())

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())

    def to_json_obj(self) -> dict:
        return {"shape": list(self.shape.dims), "data": [float(v) for v in self.data]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Tensor":
        return cls(Shape(tuple(obj["shape"])), np.asarray(obj["data"], dtype=np.float32))
