"""Frame-wise bottleneck evaluation: localisation error and accuracy sweeps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .fields import BinaryMask, read_mask, write_mask

GT_KEYS = ("mask", "center", "active")


class GroundTruthError(ValueError):
    pass


def mask_border(mask: BinaryMask) -> np.ndarray:
    """``(x, y)`` of mask pixels with a background 4-neighbour or on the frame edge."""
    bits = np.pad(mask.bits, 1, constant_values=False)
    inner = bits[1:-1, 1:-1]
    interior = bits[:-2, 1:-1] & bits[2:, 1:-1] & bits[1:-1, :-2] & bits[1:-1, 2:]
    ys, xs = np.nonzero(inner & ~interior)
    return np.column_stack([xs, ys]).astype(np.float64)


def mask_outline(mask: BinaryMask) -> np.ndarray:
    """Closed outer border polygon of the (single) mask region."""
    from .contour import trace_contours

    contours = trace_contours(mask)
    if not contours:
        # lone pixel
        return mask_border(mask)
    longest = max(contours, key=lambda c: c.arc_length)
    return longest.points.astype(np.float64)


def nearest_on_polygon(polygon: np.ndarray, point) -> np.ndarray:
    """Closest point to ``point`` on the closed polygon (vertices and edges)."""
    a = np.asarray(polygon, dtype=np.float64)
    p = np.asarray(point, dtype=np.float64)
    if len(a) == 1:
        return a[0]
    b = np.roll(a, -1, axis=0)
    ab = b - a
    length2 = np.einsum("ij,ij->i", ab, ab)
    t = np.where(length2 > 0, np.einsum("ij,ij->i", p - a, ab) / np.where(length2 > 0, length2, 1), 0)
    proj = a + np.clip(t, 0.0, 1.0)[:, None] * ab
    d2 = np.einsum("ij,ij->i", proj - p, proj - p)
    return proj[int(np.argmin(d2))]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Annotated bottleneck: mask, centre point A and frames where it exists.

    ``contour`` is the closed outline used to find the nearest border point;
    by default the traced outer border of ``mask``.
    """

    mask: BinaryMask
    center_a: tuple[float, float]
    active_intervals: tuple[tuple[int, int], ...] = ()
    contour: np.ndarray | None = None

    def __post_init__(self):
        if self.mask.count() == 0:
            raise GroundTruthError("ground-truth mask is empty")
        if self.center_a not in self.mask:
            raise GroundTruthError(f"annotated centre {self.center_a} lies outside the mask")
        intervals = tuple((int(a), int(b)) for a, b in self.active_intervals)
        for a, b in intervals:
            if a > b:
                raise GroundTruthError(f"interval {a}-{b} is reversed")
        for (_, b0), (a1, _) in zip(intervals, intervals[1:]):
            if a1 <= b0:
                raise GroundTruthError("active intervals must be sorted and non-overlapping")
        object.__setattr__(self, "active_intervals", intervals)
        contour = mask_outline(self.mask) if self.contour is None else np.asarray(self.contour, float)
        object.__setattr__(self, "contour", contour)

    def is_active(self, frame: int) -> bool:
        return any(a <= frame <= b for a, b in self.active_intervals)

    def nearest_contour_point(self, point) -> np.ndarray:
        return nearest_on_polygon(self.contour, point)


def localization_error(detection_center, gt: GroundTruth) -> float:
    """Isometric score: 0 at the annotated centre, 1 on the mask border, above 1 outside."""
    b = (float(detection_center[0]), float(detection_center[1]))
    a = gt.center_a
    c = gt.nearest_contour_point(b)
    bc = math.dist(b, c)
    if b in gt.mask:
        ab = math.dist(a, b)
        if ab + bc == 0:
            return 0.0
        return ab / (ab + bc)
    ac = math.dist(a, c)
    if ac == 0:
        return math.inf
    return bc / ac + 1.0


def _centers(items) -> list[tuple[float, float]]:
    return [tuple(getattr(it, "center", it)) for it in items]


def confusion_at_threshold(
    detections: Mapping[int, Iterable], gt: GroundTruth, epsilon_threshold: float, frames: Iterable[int]
) -> tuple[int, int, int, int]:
    """``(tp, fp, tn, fn)`` with exactly one count per frame in ``frames``."""
    tp = fp = tn = fn = 0
    for frame in frames:
        centers = _centers(detections.get(frame, ()))
        if gt.is_active(frame):
            if any(localization_error(c, gt) <= epsilon_threshold for c in centers):
                tp += 1
            else:
                fn += 1
        elif centers:
            fp += 1
        else:
            tn += 1
    return tp, fp, tn, fn


@dataclass(frozen=True)
class ThresholdRow:
    epsilon: float
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0


@dataclass(frozen=True)
class DetectionError:
    frame: int
    cx: float
    cy: float
    epsilon_d: float


@dataclass
class MetricReport:
    rows: list[ThresholdRow] = field(default_factory=list)
    detections: list[DetectionError] = field(default_factory=list)

    def accuracy_at(self, epsilon: float) -> float:
        for row in self.rows:
            if row.epsilon == epsilon:
                return row.accuracy
        raise KeyError(epsilon)

    def write(self, sweep_path, detections_path=None) -> None:
        with open(sweep_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epsilon", "tp", "fp", "tn", "fn", "accuracy"])
            for r in self.rows:
                w.writerow([f"{r.epsilon:g}", r.tp, r.fp, r.tn, r.fn, f"{r.accuracy:.6f}"])
        if detections_path is not None:
            with open(detections_path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["frame", "cx", "cy", "epsilon_d"])
                for d in self.detections:
                    w.writerow([d.frame, f"{d.cx:.2f}", f"{d.cy:.2f}", f"{d.epsilon_d:.6f}"])


def accuracy_sweep(
    detections: Mapping[int, Iterable], gt: GroundTruth, thresholds: Iterable[float], frames: Iterable[int]
) -> MetricReport:
    frames = list(frames)
    report = MetricReport()
    for eps in thresholds:
        report.rows.append(ThresholdRow(float(eps), *confusion_at_threshold(detections, gt, eps, frames)))
    for frame in sorted(detections):
        for cx, cy in _centers(detections[frame]):
            report.detections.append(DetectionError(frame, cx, cy, localization_error((cx, cy), gt)))
    return report


# --------------------------------------------------------------------------
# ground-truth documents


def _parse_intervals(text: str) -> tuple[tuple[int, int], ...]:
    text = text.strip()
    if not text:
        return ()
    out = []
    for part in text.split(","):
        lo, sep, hi = part.strip().partition("-")
        if not sep:
            raise GroundTruthError(f"bad interval {part!r}, expected <t0>-<t1>")
        out.append((int(lo), int(hi)))
    return tuple(out)


def read_ground_truth(path) -> GroundTruth:
    """Parse ``key = value`` lines with keys ``mask``, ``center`` and ``active``."""
    path = Path(path)
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise GroundTruthError(f"{path}:{lineno}: expected 'key = value'")
        if key not in GT_KEYS:
            raise GroundTruthError(f"{path}:{lineno}: unknown key {key!r}")
        if key in entries:
            raise GroundTruthError(
                f"{path}:{lineno}: duplicate {key!r}; one bottleneck per sequence is supported"
            )
        entries[key] = value.strip()
    missing = [k for k in ("mask", "center") if k not in entries]
    if missing:
        raise GroundTruthError(f"{path}: missing keys {missing}")

    mask = read_mask(path.parent / entries["mask"])
    from .contour import connected_components

    if connected_components(mask)[1] > 1:
        raise GroundTruthError(f"{path}: mask has several regions; one bottleneck per sequence")
    try:
        cx, cy = (float(v) for v in entries["center"].split(","))
    except ValueError as exc:
        raise GroundTruthError(f"{path}: bad center {entries['center']!r}") from exc
    return GroundTruth(mask, (cx, cy), _parse_intervals(entries.get("active", "")))


def write_ground_truth(gt: GroundTruth, path, mask_name: str = "gt_mask.png") -> None:
    path = Path(path)
    write_mask(gt.mask, path.parent / mask_name)
    active = ",".join(f"{a}-{b}" for a, b in gt.active_intervals)
    cx, cy = gt.center_a
    path.write_text(f"mask = {mask_name}\ncenter = {cx:g},{cy:g}\nactive = {active}\n")
