"""Finite-time Lyapunov exponents and the long-term temporal median filter."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .advection import FlowMap, flow_map_gradient
from .fields import DIRECTIONS, ScalarField

# floor for the largest Cauchy-Green eigenvalue before taking the logarithm
EIGEN_FLOOR = 1e-12


class BufferNotReady(RuntimeError):
    """Median requested before the ring buffer holds ``capacity`` fields."""


@dataclass(frozen=True)
class FtleField:
    base: ScalarField
    direction: str
    reference_frame: int
    tau: int
    filtered: bool = False

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if not isinstance(self.base, ScalarField):
            object.__setattr__(self, "base", ScalarField(self.base))

    @property
    def values(self) -> np.ndarray:
        return self.base.values

    @property
    def shape(self) -> tuple[int, int]:
        return self.base.shape


def max_eigenvalue_sym2(a, b, d):
    """Largest eigenvalue of the symmetric matrices ``[[a, b], [b, d]]``."""
    half_trace = 0.5 * (a + d)
    radius = np.hypot(0.5 * (a - d), b)
    return half_trace + radius


def cauchy_green(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Entries ``(c11, c12, c22)`` of ``G^T G`` for a ``(..., 2, 2)`` gradient field."""
    g11, g12 = grad[..., 0, 0], grad[..., 0, 1]
    g21, g22 = grad[..., 1, 0], grad[..., 1, 1]
    c11 = g11 * g11 + g21 * g21
    c12 = g11 * g12 + g21 * g22
    c22 = g12 * g12 + g22 * g22
    return c11, c12, c22


def ftle_values(grad: np.ndarray, tau: int) -> np.ndarray:
    lam = max_eigenvalue_sym2(*cauchy_green(grad))
    lam = np.maximum(lam, EIGEN_FLOOR)
    return np.log(np.sqrt(lam)) / tau


def ftle_from_map(fmap: FlowMap) -> FtleField:
    values = ftle_values(flow_map_gradient(fmap), fmap.tau)
    return FtleField(ScalarField(values), fmap.direction, fmap.reference_frame, fmap.tau)


class FtleRingBuffer:
    """The ``capacity`` most recent raw FTLE fields of one direction."""

    def __init__(self, capacity: int, delta_t: int | None = None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.delta_t = delta_t
        self._entries: deque[FtleField] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> tuple[FtleField, ...]:
        return tuple(self._entries)

    @property
    def full(self) -> bool:
        return len(self._entries) == self.capacity

    def push(self, field: FtleField) -> None:
        if self._entries:
            last = self._entries[-1]
            if field.direction != last.direction or field.tau != last.tau:
                raise ValueError("ring buffer entries must share direction and tau")
            if field.shape != last.shape:
                raise ValueError("ring buffer entries must share dimensions")
            step = field.reference_frame - last.reference_frame
            if step <= 0 or (self.delta_t is not None and step != self.delta_t):
                raise ValueError(
                    f"reference frame {field.reference_frame} does not follow "
                    f"{last.reference_frame}"
                )
        self._entries.append(field)

    def clear(self) -> None:
        self._entries.clear()


def lower_median(stack: np.ndarray, axis: int = 0) -> np.ndarray:
    """Median along ``axis``; for even counts the lower of the two middle values."""
    n = stack.shape[axis]
    k = (n - 1) // 2
    return np.take(np.partition(stack, k, axis=axis), k, axis=axis)


def median_filter(buffer: FtleRingBuffer) -> FtleField:
    if not buffer.full:
        raise BufferNotReady(f"buffer holds {len(buffer)} of {buffer.capacity} fields")
    entries = buffer.entries
    stack = np.stack([e.values for e in entries])
    newest = entries[-1]
    return FtleField(
        ScalarField(lower_median(stack)),
        newest.direction,
        newest.reference_frame,
        newest.tau,
        filtered=True,
    )
