# stdlib imports
from dataclasses import dataclass
from typing import Dict, Iterator, List, Tuple

# external imports
import numpy as np

# internal imports
from src.exceptions import ShapeError


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    shape: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


class ParamVector:
    """
    Flat float64 parameter vector with a named-segment index.

    Segments partition ``data`` exactly and are exposed as reshaped views, so
    writing through ``view(name)`` updates the flat vector in place.

    Attributes:
        data (np.ndarray): the flat parameters.
        segments (Dict[str, Segment]): name -> (offset, shape), in layout order.
        version (int): incremented on every in-place update (optimizer step, copy).
    """

    def __init__(self, layout: List[Tuple[str, Tuple[int, ...]]]) -> None:
        self.segments: Dict[str, Segment] = {}
        offset = 0
        for name, shape in layout:
            if name in self.segments:
                raise ValueError(f"Duplicate segment name {name!r}.")
            segment = Segment(name, offset, tuple(int(s) for s in shape))
            self.segments[name] = segment
            offset += segment.size
        self.data = np.zeros(offset)
        self.version = 0

    def __len__(self) -> int:
        return len(self.data)

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments.values())

    def view(self, name: str) -> np.ndarray:
        segment = self.segments[name]
        return self.data[segment.offset : segment.offset + segment.size].reshape(segment.shape)

    @property
    def layout(self) -> List[Tuple[str, Tuple[int, ...]]]:
        return [(s.name, s.shape) for s in self.segments.values()]

    def zeros_like(self) -> "ParamVector":
        return ParamVector(self.layout)

    def copy(self) -> "ParamVector":
        clone = ParamVector(self.layout)
        clone.data[:] = self.data
        return clone

    def check_compatible(self, other: "ParamVector") -> None:
        if len(self) != len(other):
            raise ShapeError(f"Parameter lengths differ: {len(self)} != {len(other)}.")

    def __repr__(self) -> str:
        return f"ParamVector ({len(self.segments)} segments, {len(self)} parameters, v{self.version})"


def copy_params(src: ParamVector, dst: ParamVector) -> None:
    """Overwrite ``dst`` with a value copy of ``src``."""
    src.check_compatible(dst)
    dst.data[:] = src.data
    dst.version += 1


def glorot_uniform(
    weights: np.ndarray, rng: np.random.Generator, fan_in: int, fan_out: int
) -> None:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    weights[...] = rng.uniform(-limit, limit, size=weights.shape)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def clip_grad_norm(grad: ParamVector, max_norm: float) -> float:
    """Scale ``grad`` in place so its L2 norm is at most ``max_norm``; return the original norm."""
    norm = float(np.linalg.norm(grad.data))
    if max_norm > 0 and norm > max_norm:
        grad.data *= max_norm / norm
    return norm


def check_width(array: np.ndarray, width: int, what: str) -> None:
    if array.shape[-1] != width:
        raise ShapeError(f"{what} has width {array.shape[-1]}, expected {width}.")

