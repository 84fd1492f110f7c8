"""Frame-by-frame driver composing FTLE, ridge maps, contours and tracking."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .advection import advect
from .config import PipelineConfig, parse_threshold
from .contour import (
    RidgeMaps,
    TracedContour,
    build_ridge_maps,
    connected_components,
    convex_hull_and_defects,
    positive_percentile,
    trace_contours,
)
from .detector import (
    CandidatePair,
    Detection,
    DetectorParams,
    TrackState,
    enumerate_candidates,
    geometric_filter,
    update_tracks,
    validate,
)
from .fields import FlowSequence
from .ftle import FtleField, FtleRingBuffer, ftle_from_map, median_filter

log = logging.getLogger(__name__)


@dataclass
class FrameResult:
    frame: int
    ftle_fwd: FtleField
    ftle_bwd: FtleField
    filtered_fwd: FtleField | None = None
    filtered_bwd: FtleField | None = None
    ridges: RidgeMaps | None = None
    contours: list[TracedContour] = field(default_factory=list)
    candidates: list[CandidatePair] = field(default_factory=list)
    filtered_pairs: list[CandidatePair] = field(default_factory=list)
    detections: list[Detection] = field(default_factory=list)
    confirmed: list[Detection] = field(default_factory=list)

    @property
    def evaluated(self) -> bool:
        """Whether the median filter was ready, i.e. the detector produced output."""
        return self.ridges is not None


def reference_slots(n_fields: int, tau: int) -> range:
    """Slots with ``tau`` forward fields ahead and ``tau`` backward fields behind."""
    return range(tau, n_fields - tau + 1)


def resolve_thresholds(config: PipelineConfig, fwd: FtleField, bwd: FtleField) -> tuple[float, float]:
    out = []
    for text in (config.sigma_low, config.sigma_high):
        kind, value = parse_threshold(text)
        out.append(positive_percentile((fwd, bwd), value) if kind == "percentile" else value)
    return out[0], out[1]


class BottleneckDetector:
    """Runs the detection chain over aligned forward/backward flow sequences."""

    def __init__(self, config: PipelineConfig):
        self.config = config.validate()
        self.params = DetectorParams(config.sigma_s, config.sigma_r, config.sigma_o)

    def analyse(self, fwd_bar: FtleField, bwd_bar: FtleField, result: FrameResult) -> None:
        cfg = self.config
        sigma_low, sigma_high = resolve_thresholds(cfg, fwd_bar, bwd_bar)
        log.debug("frame %d: sigma_low=%r sigma_high=%r", result.frame, sigma_low, sigma_high)
        ridges = build_ridge_maps(fwd_bar, bwd_bar, sigma_low, sigma_high, cfg.dilation_radius)
        h, w = fwd_bar.shape
        contours = [
            convex_hull_and_defects(c, cfg.sigma_depth)
            for c in trace_contours(ridges.m_seg, cfg.resolved_min_length(w, h))
        ]
        candidates = enumerate_candidates(contours)
        kept = geometric_filter(candidates, self.params)
        labels, _ = connected_components(ridges.m_val)
        result.ridges = ridges
        result.contours = contours
        result.candidates = candidates
        result.filtered_pairs = kept
        result.detections = [
            Detection.from_pair(p, result.frame)
            for p in kept
            if validate(p, ridges.m_val, labels, cfg.sigma_r)
        ]

    def run(self, forward: FlowSequence, backward: FlowSequence) -> Iterator[FrameResult]:
        if len(forward) != len(backward):
            raise ValueError("forward and backward sequences differ in length")
        cfg = self.config
        buf_fwd = FtleRingBuffer(cfg.tau_s, forward.delta_t)
        buf_bwd = FtleRingBuffer(cfg.tau_s, forward.delta_t)
        tracks = TrackState()
        for slot in reference_slots(len(forward), cfg.tau):
            ftle_fwd = ftle_from_map(advect(forward, slot, cfg.tau))
            ftle_bwd = ftle_from_map(advect(backward, slot - 1, cfg.tau))
            result = FrameResult(ftle_fwd.reference_frame, ftle_fwd, ftle_bwd)
            buf_fwd.push(ftle_fwd)
            buf_bwd.push(ftle_bwd)
            if buf_fwd.full:
                result.filtered_fwd = median_filter(buf_fwd)
                result.filtered_bwd = median_filter(buf_bwd)
                self.analyse(result.filtered_fwd, result.filtered_bwd, result)
                tracks, result.confirmed = update_tracks(
                    tracks, result.detections, self.params, result.frame
                )
            yield result


def format_detection(det: Detection) -> str:
    (x0, y0), (x1, y1) = det.pair.p0, det.pair.p1
    cx, cy = det.center
    return f"{det.reference_frame},{x0:.2f},{y0:.2f},{x1:.2f},{y1:.2f},{cx:.2f},{cy:.2f}"


def read_detections(path) -> dict[int, list[tuple[float, float]]]:
    """Detection records grouped by frame as ``{frame: [(cx, cy), ...]}``."""
    out: dict[int, list[tuple[float, float]]] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise ValueError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
        frame = int(parts[0])
        cx, cy = float(parts[5]), float(parts[6])
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise ValueError(f"{path}:{lineno}: non-finite centre")
        out.setdefault(frame, []).append((cx, cy))
    return out
