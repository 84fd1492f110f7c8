"""Ridge masks, connected components, boundary tracing and convexity defects."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .fields import BinaryMask
from .ftle import FtleField

# clockwise on screen (y grows downward), starting west
NEIGHBOURS = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_DIRECTION_OF = {d: i for i, d in enumerate(NEIGHBOURS)}
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Defect:
    start: int
    end: int
    farthest: int
    depth: float


@dataclass(frozen=True)
class TracedContour:
    """Closed polygon ``points[i] = (x, y)``; the last point connects to the first."""

    points: np.ndarray
    arc_length: float
    hull: tuple[int, ...] = ()
    defects: tuple[Defect, ...] = ()
    label: int = 0

    @classmethod
    def from_points(cls, points, label: int = 0) -> "TracedContour":
        pts = np.asarray(points)
        return cls(pts, polygon_length(pts), label=label)

    def __len__(self) -> int:
        return len(self.points)

    def cumulative_length(self) -> np.ndarray:
        """Arc length from point 0 to each point along the traversal order."""
        steps = np.hypot(*np.diff(self.points.astype(np.float64), axis=0).T)
        return np.concatenate([[0.0], np.cumsum(steps)])

    def arc_between(self, i: int, j: int) -> float:
        """Shorter of the two arcs between contour points ``i`` and ``j``."""
        cum = self.cumulative_length()
        one_way = abs(cum[j] - cum[i])
        return min(one_way, self.arc_length - one_way)


@dataclass(frozen=True)
class RidgeMaps:
    m_low_fwd: BinaryMask
    m_low_bwd: BinaryMask
    m_high_fwd: BinaryMask
    m_high_bwd: BinaryMask
    m_seg: BinaryMask
    m_val: BinaryMask
    reference_frame: int
    thresholds: dict = field(default_factory=dict)


def polygon_length(points) -> float:
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return 0.0
    closed = np.vstack([pts, pts[:1]])
    return float(np.hypot(*np.diff(closed, axis=0).T).sum())


# --------------------------------------------------------------------------
# masks


def binarize(field: FtleField | np.ndarray, threshold: float) -> BinaryMask:
    """Pixels strictly above ``threshold``."""
    if isinstance(field, FtleField):
        if not field.filtered:
            raise ValueError("binarize expects a median-filtered FTLE field")
        values = field.values
    else:
        values = np.asarray(field)
    return BinaryMask(values > threshold)


def dilate(mask: BinaryMask, radius: int) -> BinaryMask:
    """Dilation with a ``(2r+1) x (2r+1)`` square."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0:
        return mask
    size = 2 * radius + 1
    return BinaryMask(ndimage.binary_dilation(mask.bits, structure=np.ones((size, size), bool)))


def combine(low_fwd: BinaryMask, low_bwd: BinaryMask, high_fwd: BinaryMask, high_bwd: BinaryMask):
    """Return ``(m_seg, m_val)`` from four already dilated masks."""
    shapes = {m.shape for m in (low_fwd, low_bwd, high_fwd, high_bwd)}
    if len(shapes) != 1:
        raise ValueError(f"mask shapes differ: {sorted(shapes)}")
    m_seg = BinaryMask(low_bwd.bits | low_fwd.bits)
    m_val = BinaryMask(high_bwd.bits & high_fwd.bits)
    return m_seg, m_val


def positive_percentile(fields, q: float) -> float:
    """``q``-th percentile of the strictly positive values pooled over ``fields``.

    Returns ``inf`` when no value is positive, so thresholding yields empty masks.
    """
    pooled = np.concatenate([np.asarray(getattr(f, "values", f)).ravel() for f in fields])
    positive = pooled[pooled > 0]
    if positive.size == 0:
        return math.inf
    return float(np.percentile(positive, q))


def build_ridge_maps(
    fwd: FtleField,
    bwd: FtleField,
    sigma_low: float,
    sigma_high: float,
    radius: int,
) -> RidgeMaps:
    m_low_fwd = binarize(fwd, sigma_low)
    m_low_bwd = binarize(bwd, sigma_low)
    m_high_fwd = binarize(fwd, sigma_high)
    m_high_bwd = binarize(bwd, sigma_high)
    m_seg, m_val = combine(*(dilate(m, radius) for m in (m_low_fwd, m_low_bwd, m_high_fwd, m_high_bwd)))
    return RidgeMaps(
        m_low_fwd, m_low_bwd, m_high_fwd, m_high_bwd, m_seg, m_val,
        reference_frame=fwd.reference_frame,
        thresholds={"sigma_low": sigma_low, "sigma_high": sigma_high},
    )


def connected_components(mask: BinaryMask) -> tuple[np.ndarray, int]:
    """8-connected labels ``1..n`` numbered by first raster occurrence; 0 is background."""
    labels, n = ndimage.label(mask.bits, structure=EIGHT_CONNECTED)
    return labels, int(n)


# --------------------------------------------------------------------------
# boundary tracing


def _moore_step(bits: np.ndarray, p: tuple[int, int], back: int):
    """Next boundary pixel clockwise from the backtrack direction ``back``."""
    h, w = bits.shape
    x, y = p
    for i in range(1, 9):
        d = (back + i) % 8
        dx, dy = NEIGHBOURS[d]
        qx, qy = x + dx, y + dy
        if 0 <= qx < w and 0 <= qy < h and bits[qy, qx]:
            px, py = NEIGHBOURS[(d - 1) % 8]
            # backtrack pixel seen from the new position
            new_back = _DIRECTION_OF[(x + px - qx, y + py - qy)]
            return (qx, qy), new_back
    return None


def trace_boundary(bits: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore-neighbour trace of the outer border through ``start``.

    ``start`` must be the first raster pixel of its component, so its west
    neighbour is background.  Points come out clockwise on screen.
    """
    first = _moore_step(bits, start, 0)
    if first is None:
        return [start]
    points = [start]
    cur, back = first
    second = first[0]
    while True:
        if cur == start:
            nxt = _moore_step(bits, cur, back)
            if nxt[0] == second:
                break
        points.append(cur)
        cur, back = _moore_step(bits, cur, back)
    return points


def trace_contours(mask: BinaryMask, min_length: float = 0.0) -> list[TracedContour]:
    """Outer borders of the 8-connected components with arc length >= ``min_length``."""
    labels, n = connected_components(mask)
    if n == 0:
        return []
    # first raster pixel of each label
    flat = labels.ravel()
    order = np.flatnonzero(flat)
    first_idx = {}
    for idx in order[np.unique(flat[order], return_index=True)[1]]:
        first_idx[int(flat[idx])] = int(idx)
    w = mask.width
    contours = []
    for label in range(1, n + 1):
        idx = first_idx[label]
        start = (idx % w, idx // w)
        component = labels == label
        pts = np.asarray(trace_boundary(component, start), dtype=np.int64)
        contour = TracedContour.from_points(pts, label=label)
        if contour.arc_length >= min_length and contour.arc_length > 0:
            contours.append(contour)
    return contours


# --------------------------------------------------------------------------
# hull and defects


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> list[tuple]:
    """Strictly convex hull vertices (monotone chain), counter-clockwise in math axes."""
    pts = sorted(set(map(tuple, np.asarray(points).tolist())))
    if len(pts) <= 2:
        return pts
    lower: list[tuple] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def point_line_distance(p, a, b) -> float:
    """Perpendicular distance of ``p`` to the line through ``a`` and ``b``."""
    ax, ay = a
    bx, by = b
    length = math.hypot(bx - ax, by - ay)
    if length == 0:
        return math.hypot(p[0] - ax, p[1] - ay)
    return abs((bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax)) / length


def convex_hull_and_defects(contour: TracedContour, sigma_depth: float = 0.0) -> TracedContour:
    """Populate hull indices and the defects at least ``sigma_depth`` deep."""
    pts = np.asarray(contour.points)
    n = len(pts)
    first_index: dict[tuple, int] = {}
    for i, p in enumerate(map(tuple, pts.tolist())):
        first_index.setdefault(p, i)
    hull = tuple(sorted(first_index[v] for v in convex_hull(pts)))

    defects = []
    if len(hull) >= 2:
        plist = pts.tolist()
        for k, start in enumerate(hull):
            end = hull[(k + 1) % len(hull)]
            span = (end - start) % n
            if span <= 1:
                continue
            a, b = plist[start], plist[end]
            best, best_depth = -1, -1.0
            for off in range(1, span):
                i = (start + off) % n
                depth = point_line_distance(plist[i], a, b)
                if depth > best_depth:
                    best, best_depth = i, depth
            if best_depth > 0 and best_depth >= sigma_depth:
                defects.append(Defect(start, end, best, best_depth))
    return replace(contour, hull=hull, defects=tuple(defects))
