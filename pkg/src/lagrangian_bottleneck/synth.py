"""Analytic flow scenes with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evaluate import GroundTruth, write_ground_truth
from .fields import BACKWARD, FORWARD, BinaryMask, FlowField, FlowSequence, flow_filename, write_flo

KINDS = ("zero", "uniform", "saddle", "funnel")
MAX_STEP = 3.0


@dataclass(frozen=True)
class Scenario:
    """Parameters of a synthetic scene.

    ``uniform`` uses ``u, v``; ``saddle`` uses ``a`` and ``center``;
    ``funnel`` uses ``gap_center`` (y of the gap axis), ``gap_width``,
    ``wall_x``, ``speed`` (mean speed through the gap, pixels per step),
    ``onset_frame`` and ``mouth_half_width`` (half-width of the funnel at
    the left frame edge, default ``0.4 * height``).
    """

    kind: str
    width: int = 160
    height: int = 120
    frames: int = 300
    u: float = 0.0
    v: float = 0.0
    a: float = 0.1
    center: tuple[float, float] | None = None
    gap_center: float | None = None
    gap_width: float = 16.0
    wall_x: float = 100.0
    speed: float = 2.0
    onset_frame: int = 0
    mouth_half_width: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.width < 3 or self.height < 3 or self.frames < 1:
            raise ValueError("scenario needs at least 3x3 pixels and one frame")
        if self.kind == "funnel":
            if not 0 < self.gap_width < self.height:
                raise ValueError("gap_width must lie in (0, height)")
            if not 0 < self.wall_x < self.width:
                raise ValueError("wall_x must lie in (0, width)")
            if not 0 <= self.onset_frame < self.frames:
                raise ValueError("onset_frame must lie in [0, frames)")
            if self.speed <= 0 or 1.5 * self.speed > MAX_STEP:
                raise ValueError(f"peak funnel speed 1.5*speed must be in (0, {MAX_STEP}]")
            if self.half_width_at_mouth <= self.gap_width / 2:
                raise ValueError("funnel mouth must be wider than the gap")

    @property
    def axis_y(self) -> float:
        return (self.height - 1) / 2 if self.gap_center is None else float(self.gap_center)

    @property
    def half_width_at_mouth(self) -> float:
        return 0.4 * self.height if self.mouth_half_width is None else float(self.mouth_half_width)

    @property
    def gap_point(self) -> tuple[float, float]:
        return (float(self.wall_x), self.axis_y)


def _grid(width, height):
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return xs, ys


def funnel_vectors(sc: Scenario) -> np.ndarray:
    """Converging channel feeding a jet through a gap in a vertical wall.

    Upstream of the wall the channel narrows linearly from the mouth to the
    gap; the horizontal velocity has a parabolic (laminar) profile across the
    channel with the mean speed scaled by gap/channel width, and the lateral
    component steers along the converging streamlines.  Downstream only the
    gap band moves; everything behind the walls is at rest.
    """
    xs, ys = _grid(sc.width, sc.height)
    half_gap = sc.gap_width / 2
    slope = (half_gap - sc.half_width_at_mouth) / sc.wall_x
    upstream = xs <= sc.wall_x
    half_width = np.where(upstream, sc.half_width_at_mouth + slope * np.minimum(xs, sc.wall_x), half_gap)
    eta = (ys - sc.axis_y) / half_width
    inside = np.abs(eta) <= 1.0
    mean_speed = sc.speed * half_gap / half_width
    u = np.where(inside, 1.5 * mean_speed * (1.0 - eta**2), 0.0)
    v = np.where(inside & upstream, u * eta * slope, 0.0)
    return np.stack([u, v], axis=-1)


def steady_vectors(sc: Scenario) -> np.ndarray:
    """Flow of the scene once active (time-independent for every kind)."""
    if sc.kind == "zero":
        return np.zeros((sc.height, sc.width, 2))
    if sc.kind == "uniform":
        return FlowField.uniform(sc.width, sc.height, sc.u, sc.v).vectors.copy()
    if sc.kind == "saddle":
        cx, cy = sc.center if sc.center is not None else ((sc.width - 1) / 2, (sc.height - 1) / 2)
        xs, ys = _grid(sc.width, sc.height)
        return np.stack([sc.a * (xs - cx), -sc.a * (ys - cy)], axis=-1)
    return funnel_vectors(sc)


def frame_vectors(sc: Scenario, frame: int) -> np.ndarray:
    if sc.kind == "funnel" and frame < sc.onset_frame:
        return np.zeros((sc.height, sc.width, 2))
    return steady_vectors(sc)


def warmup_margin(delta_t: int, tau_s: int, sigma_o: int) -> int:
    return (tau_s - 1 + sigma_o - 1) * delta_t


def ground_truth(sc: Scenario, delta_t: int = 4, tau_s: int = 5, sigma_o: int = 3) -> GroundTruth | None:
    """Disc of radius ``gap_width/2`` at the gap, active after onset plus warm-up."""
    if sc.kind != "funnel":
        return None
    xs, ys = _grid(sc.width, sc.height)
    gx, gy = sc.gap_point
    disc = np.hypot(xs - gx, ys - gy) <= sc.gap_width / 2
    start = sc.onset_frame + warmup_margin(delta_t, tau_s, sigma_o)
    active = ((start, sc.frames - 1),) if start <= sc.frames - 1 else ()
    return GroundTruth(BinaryMask(disc), (gx, gy), active)


def sequences(sc: Scenario, delta_t: int = 4) -> tuple[FlowSequence, FlowSequence]:
    """In-memory equivalent of :func:`generate` followed by ``build_sequences``."""
    frames = range(0, sc.frames, delta_t)
    fwd = [FlowField(frame_vectors(sc, f).astype(np.float32)) for f in frames]
    bwd = [FlowField(-f.vectors) for f in fwd]
    return FlowSequence(fwd, FORWARD, delta_t, 0), FlowSequence(bwd, BACKWARD, delta_t, 0)


def generate(
    sc: Scenario, out_dir, delta_t: int = 4, tau_s: int = 5, sigma_o: int = 3
) -> GroundTruth | None:
    """Write ``fwd_%06d.flo``/``bwd_%06d.flo`` for every frame and, for funnels, ``gt.txt``.

    File ``k`` holds the displacement of one ``delta_t`` step starting at
    frame ``k``; backward files are the exact negation of forward ones.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    steady = FlowField(steady_vectors(sc).astype(np.float32))
    still = FlowField(np.zeros((sc.height, sc.width, 2), np.float32))
    steady_back, still_back = FlowField(-steady.vectors), FlowField(-still.vectors)
    for frame in range(sc.frames):
        active = not (sc.kind == "funnel" and frame < sc.onset_frame)
        write_flo(steady if active else still, out / flow_filename(FORWARD, frame))
        write_flo(steady_back if active else still_back, out / flow_filename(BACKWARD, frame))
    gt = ground_truth(sc, delta_t, tau_s, sigma_o)
    if gt is not None:
        write_ground_truth(gt, out / "gt.txt")
    return gt
