"""Particle advection through flow sequences and flow-map gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import BACKWARD, FORWARD, FlowSequence, _frozen, sample_bilinear_many


class AdvectionRangeError(IndexError):
    """Not enough flow fields for the requested integration length."""


@dataclass(frozen=True)
class FlowMap:
    """End positions ``(x, y)`` of particles seeded at every pixel centre."""

    end_positions: np.ndarray
    reference_frame: int
    tau: int
    direction: str

    def __post_init__(self):
        pos = np.asarray(self.end_positions, dtype=np.float64)
        if pos.ndim != 3 or pos.shape[2] != 2:
            raise ValueError(f"end positions must have shape (h, w, 2), got {pos.shape}")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.direction not in (FORWARD, BACKWARD):
            raise ValueError(f"unknown direction {self.direction!r}")
        object.__setattr__(self, "end_positions", _frozen(pos))

    @property
    def width(self) -> int:
        return self.end_positions.shape[1]

    @property
    def height(self) -> int:
        return self.end_positions.shape[0]

    @classmethod
    def from_function(cls, fn, width, height, tau=1, direction=FORWARD, reference_frame=0):
        """Build a synthetic map ``phi(x, y) -> (x', y')`` evaluated on the pixel grid."""
        ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
        px, py = fn(xs, ys)
        pos = np.stack(np.broadcast_arrays(px, py), axis=-1)
        return cls(pos, reference_frame, tau, direction)


def seed_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return xs, ys


def advect(sequence: FlowSequence, start_slot: int, tau: int) -> FlowMap:
    """Integrate path lines over ``tau`` explicit Euler steps.

    Forward sequences consume slots ``start_slot .. start_slot+tau-1``;
    backward sequences walk ``start_slot, start_slot-1, ..`` toward earlier
    slots.  Positions are clamped to the frame after every step.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    n = len(sequence)
    if sequence.direction == FORWARD:
        if start_slot < 0 or start_slot + tau > n:
            raise AdvectionRangeError(
                f"forward advection needs slots {start_slot}..{start_slot + tau - 1}, "
                f"sequence has {n}"
            )
        slots = range(start_slot, start_slot + tau)
        reference = sequence.frame_of_slot(start_slot)
    else:
        if start_slot >= n or start_slot - tau < -1:
            raise AdvectionRangeError(
                f"backward advection needs slots {start_slot}..{start_slot - tau + 1}, "
                f"sequence has {n}"
            )
        slots = range(start_slot, start_slot - tau, -1)
        reference = sequence.frame_of_slot(start_slot + 1)

    h, w = sequence.shape
    xs, ys = seed_grid(w, h)
    for k in slots:
        v = sequence[k].vectors
        if v.dtype != np.float64:
            v = v.astype(np.float64)
        step = sample_bilinear_many(v, xs, ys)
        xs = np.clip(xs + step[..., 0], 0.0, w - 1)
        ys = np.clip(ys + step[..., 1], 0.0, h - 1)
    return FlowMap(np.stack([xs, ys], axis=-1), reference, tau, sequence.direction)


def flow_map_gradient(fmap: FlowMap) -> np.ndarray:
    """Per-pixel Jacobian of the flow map, shape ``(h, w, 2, 2)``.

    Entry ``[..., i, j]`` is the derivative of end coordinate ``i`` with
    respect to seed coordinate ``j`` (0 = x, 1 = y).  Central differences in
    the interior, one-sided on the border.
    """
    if fmap.width < 3 or fmap.height < 3:
        raise ValueError("flow map gradient needs at least 3x3 pixels")
    px = fmap.end_positions[..., 0]
    py = fmap.end_positions[..., 1]
    grad = np.empty(fmap.end_positions.shape[:2] + (2, 2))
    grad[..., 0, 0] = np.gradient(px, axis=1)
    grad[..., 0, 1] = np.gradient(px, axis=0)
    grad[..., 1, 0] = np.gradient(py, axis=1)
    grad[..., 1, 1] = np.gradient(py, axis=0)
    return grad
