"""Bottleneck candidates from contour defects, their validation and tracking."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .contour import TracedContour
from .fields import BinaryMask


@dataclass(frozen=True)
class DetectorParams:
    sigma_s: float = 0.1
    sigma_r: float = 30.0
    sigma_o: int = 3

    def __post_init__(self):
        if not 0 < self.sigma_s < 1:
            raise ValueError(f"sigma_s must lie in (0, 1), got {self.sigma_s}")
        if self.sigma_r <= 0:
            raise ValueError(f"sigma_r must be positive, got {self.sigma_r}")
        if self.sigma_o < 1:
            raise ValueError(f"sigma_o must be >= 1, got {self.sigma_o}")


@dataclass(frozen=True)
class CandidatePair:
    p0: tuple[float, float]
    p1: tuple[float, float]
    d_c: float
    arc_between: float
    contour_ref: int
    l_s: float

    @property
    def midpoint(self) -> tuple[float, float]:
        return (0.5 * (self.p0[0] + self.p1[0]), 0.5 * (self.p0[1] + self.p1[1]))


@dataclass(frozen=True)
class Detection:
    center: tuple[float, float]
    pair: CandidatePair
    reference_frame: int
    confirmed: bool = False

    @classmethod
    def from_pair(cls, pair: CandidatePair, frame: int) -> "Detection":
        return cls(pair.midpoint, pair, frame)


@dataclass(frozen=True)
class Track:
    center_sum: tuple[float, float]
    members: int
    consecutive_hits: int
    last_seen_frame: int

    @property
    def running_center(self) -> tuple[float, float]:
        return (self.center_sum[0] / self.members, self.center_sum[1] / self.members)


@dataclass(frozen=True)
class TrackState:
    tracks: tuple[Track, ...] = field(default_factory=tuple)


def enumerate_candidates(contours: list[TracedContour]) -> list[CandidatePair]:
    """All pairs of distinct defect points lying on the same contour."""
    pairs = []
    for ref, contour in enumerate(contours):
        idx = sorted({d.farthest for d in contour.defects})
        for i, j in itertools.combinations(idx, 2):
            p0 = tuple(float(c) for c in contour.points[i])
            p1 = tuple(float(c) for c in contour.points[j])
            if p0 == p1:
                continue
            d_c = math.dist(p0, p1)
            pairs.append(
                CandidatePair(p0, p1, d_c, contour.arc_between(i, j), ref, contour.arc_length)
            )
    return pairs


def passes_ratio(pair: CandidatePair, params: DetectorParams) -> bool:
    return pair.d_c / pair.l_s < params.sigma_s


def passes_opposition(pair: CandidatePair) -> bool:
    return pair.arc_between > 2.0 * pair.d_c


def geometric_filter(pairs, params: DetectorParams) -> list[CandidatePair]:
    return [p for p in pairs if passes_ratio(p, params) and passes_opposition(p)]


def window_labels(center, labels: np.ndarray, sigma_r: float) -> set[int]:
    """Non-zero labels inside the ``sigma_r x sigma_r`` window around ``center``."""
    h, w = labels.shape
    half = 0.5 * sigma_r
    x0 = max(math.ceil(center[0] - half), 0)
    x1 = min(math.floor(center[0] + half), w - 1)
    y0 = max(math.ceil(center[1] - half), 0)
    y1 = min(math.floor(center[1] + half), h - 1)
    if x0 > x1 or y0 > y1:
        return set()
    found = np.unique(labels[y0 : y1 + 1, x0 : x1 + 1])
    return {int(v) for v in found if v != 0}


def validate(pair: CandidatePair, m_val: BinaryMask, m_val_labels: np.ndarray, sigma_r: float) -> bool:
    """True when the window around the pair midpoint meets two separate validation ridges."""
    if m_val_labels.shape != m_val.shape:
        raise ValueError("label image does not match the validation mask")
    return len(window_labels(pair.midpoint, m_val_labels, sigma_r)) >= 2


def update_tracks(
    state: TrackState, detections: list[Detection], params: DetectorParams, frame: int
) -> tuple[TrackState, list[Detection]]:
    """Greedy nearest-track association with strict consecutiveness.

    Returns the new state and the detections whose track reached ``sigma_o``
    consecutive hits, flagged ``confirmed``.
    """
    old = list(state.tracks)
    taken = [False] * len(old)
    new_tracks: list[Track] = []
    confirmed: list[Detection] = []
    for det in sorted(detections, key=lambda d: (d.center[1], d.center[0])):
        best, best_dist = None, math.inf
        for k, tr in enumerate(old):
            if taken[k]:
                continue
            dist = math.dist(tr.running_center, det.center)
            if dist <= params.sigma_r and dist < best_dist:
                best, best_dist = k, dist
        if best is None:
            track = Track(det.center, 1, 1, frame)
        else:
            taken[best] = True
            tr = old[best]
            track = Track(
                (tr.center_sum[0] + det.center[0], tr.center_sum[1] + det.center[1]),
                tr.members + 1,
                tr.consecutive_hits + 1,
                frame,
            )
        new_tracks.append(track)
        if track.consecutive_hits >= params.sigma_o:
            confirmed.append(Detection(det.center, det.pair, frame, confirmed=True))
    return TrackState(tuple(new_tracks)), confirmed
