"""Field containers, bilinear sampling and flow/image file I/O."""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

FLO_MAGIC = b"PIEH"
# Middlebury convention: components above this magnitude mean "unknown flow".
FLO_UNKNOWN_THRESHOLD = 1e9

FORWARD = "forward"
BACKWARD = "backward"
DIRECTIONS = (FORWARD, BACKWARD)

_FLOW_NAME = re.compile(r"^(fwd|bwd)_(\d{6})\.flo$")


class FlowFormatError(ValueError):
    """Malformed ``.flo`` payload."""


class SequenceError(ValueError):
    """Flow files missing or inconsistent when assembling a sequence."""


def _frozen(array: np.ndarray) -> np.ndarray:
    # copy so freezing never touches the caller's buffer
    array = np.array(array, order="C", copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FlowField:
    """Dense motion vectors of one frame pairing, shape ``(height, width, 2)``.

    Vectors are ``(u, v)`` displacements in pixels per step.  Float32 and
    float64 storage are both kept as given; files always hold float32.
    """

    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors)
        if not np.issubdtype(vectors.dtype, np.floating):
            vectors = vectors.astype(np.float64)
        if vectors.ndim != 3 or vectors.shape[2] != 2:
            raise ValueError(f"flow vectors must have shape (h, w, 2), got {vectors.shape}")
        if vectors.shape[0] == 0 or vectors.shape[1] == 0:
            raise ValueError("flow field must be non-empty")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("flow field contains non-finite values")
        object.__setattr__(self, "vectors", _frozen(vectors))

    @property
    def width(self) -> int:
        return self.vectors.shape[1]

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.vectors.shape[:2]

    @classmethod
    def zeros(cls, width: int, height: int) -> "FlowField":
        return cls(np.zeros((height, width, 2)))

    @classmethod
    def uniform(cls, width: int, height: int, u: float, v: float) -> "FlowField":
        vectors = np.empty((height, width, 2))
        vectors[..., 0] = u
        vectors[..., 1] = v
        return cls(vectors)

    def __eq__(self, other):
        if not isinstance(other, FlowField):
            return NotImplemented
        return self.vectors.dtype == other.vectors.dtype and np.array_equal(
            self.vectors.view(np.uint8), other.vectors.view(np.uint8)
        )

    __hash__ = None


@dataclass(frozen=True)
class FlowSequence:
    """Delta-t subsampled flow fields of one direction.

    Forward slot ``k`` maps frame ``base + k*dt`` to ``base + (k+1)*dt``;
    backward slot ``k`` maps ``base + (k+1)*dt`` back to ``base + k*dt``.
    """

    fields: tuple[FlowField, ...]
    direction: str
    delta_t: int = 1
    base_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        if self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.delta_t < 1:
            raise ValueError("delta_t must be >= 1")
        if self.fields:
            shape = self.fields[0].shape
            for k, f in enumerate(self.fields):
                if f.shape != shape:
                    raise SequenceError(
                        f"field {k} has shape {f.shape}, expected {shape}"
                    )

    def __len__(self) -> int:
        return len(self.fields)

    def __getitem__(self, k: int) -> FlowField:
        return self.fields[k]

    @property
    def shape(self) -> tuple[int, int]:
        return self.fields[0].shape

    def frame_of_slot(self, slot: int) -> int:
        """Source frame index at which slot ``slot`` starts (lower frame)."""
        return self.base_index + slot * self.delta_t


@dataclass(frozen=True)
class ScalarField:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or 0 in values.shape:
            raise ValueError(f"scalar field must be a non-empty 2D array, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("scalar field contains non-finite values")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits).astype(bool, copy=False)
        if bits.ndim != 2 or 0 in bits.shape:
            raise ValueError(f"mask must be a non-empty 2D array, got {bits.shape}")
        object.__setattr__(self, "bits", _frozen(bits))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def count(self) -> int:
        return int(self.bits.sum())

    def __contains__(self, point) -> bool:
        x, y = int(round(point[0])), int(round(point[1]))
        return 0 <= x < self.width and 0 <= y < self.height and bool(self.bits[y, x])

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None


# --------------------------------------------------------------------------
# interpolation


def sample_bilinear_many(vectors: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear sample of an ``(h, w, c)`` grid at many points.

    Positions are clamped to ``[0, w-1] x [0, h-1]`` first.  Returns an array
    of shape ``xs.shape + (c,)``.
    """
    h, w = vectors.shape[:2]
    x = np.clip(xs, 0.0, w - 1)
    y = np.clip(ys, 0.0, h - 1)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    # keep x0 <= w-2 so the right neighbour exists; weight absorbs the rest
    x0 = np.minimum(x0, max(w - 2, 0))
    y0 = np.minimum(y0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = vectors[y0, x0] * (1.0 - fx) + vectors[y0, x1] * fx
    bottom = vectors[y1, x0] * (1.0 - fx) + vectors[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def sample_bilinear(field: FlowField, position) -> np.ndarray:
    """Interpolated flow vector at a continuous ``(x, y)`` position."""
    x, y = position
    out = sample_bilinear_many(
        field.vectors.astype(np.float64, copy=False), np.asarray([x], float), np.asarray([y], float)
    )
    return out[0]


# --------------------------------------------------------------------------
# .flo I/O


def read_flo(path) -> FlowField:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12:
        raise FlowFormatError(f"{path}: truncated header")
    if data[:4] != FLO_MAGIC:
        raise FlowFormatError(f"{path}: bad magic {data[:4]!r}")
    width, height = struct.unpack("<ii", data[4:12])
    if width <= 0 or height <= 0:
        raise FlowFormatError(f"{path}: invalid dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(data) < expected:
        raise FlowFormatError(
            f"{path}: truncated payload ({len(data)} bytes, expected {expected})"
        )
    vectors = np.frombuffer(data, dtype="<f4", count=2 * width * height, offset=12)
    vectors = vectors.reshape(height, width, 2).astype(np.float32)
    if not np.all(np.isfinite(vectors)):
        raise FlowFormatError(f"{path}: non-finite flow values")
    unknown = np.any(np.abs(vectors) > FLO_UNKNOWN_THRESHOLD, axis=2)
    vectors[unknown] = 0.0
    return FlowField(vectors)


def write_flo(field: FlowField, path) -> None:
    h, w = field.shape
    payload = np.ascontiguousarray(field.vectors, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(FLO_MAGIC)
        fh.write(struct.pack("<ii", w, h))
        fh.write(payload.tobytes())


def flow_filename(direction: str, frame: int) -> str:
    prefix = {FORWARD: "fwd", BACKWARD: "bwd"}[direction]
    return f"{prefix}_{frame:06d}.flo"


def _scan_flow_dir(flow_dir: Path) -> dict[str, dict[int, Path]]:
    found: dict[str, dict[int, Path]] = {"fwd": {}, "bwd": {}}
    for p in flow_dir.iterdir():
        m = _FLOW_NAME.match(p.name)
        if m:
            found[m.group(1)][int(m.group(2))] = p
    return found


def _as_field(item) -> FlowField:
    return item if isinstance(item, FlowField) else read_flo(item)


def build_sequences(
    source: "str | Path | Sequence | Mapping[int, tuple]", delta_t: int
) -> tuple[FlowSequence, FlowSequence]:
    """Assemble aligned forward/backward sequences using every ``delta_t``-th pairing.

    ``source`` is either a directory with ``fwd_%06d.flo``/``bwd_%06d.flo``
    files, a mapping ``{frame: (forward, backward)}``, or a list of
    ``(forward, backward)`` pairs already spaced ``delta_t`` frames apart
    starting at frame 0.  Items may be paths or :class:`FlowField` objects.
    """
    if delta_t < 1:
        raise ValueError("delta_t must be >= 1")

    if isinstance(source, (str, Path)):
        flow_dir = Path(source)
        if not flow_dir.is_dir():
            raise SequenceError(f"flow directory not found: {flow_dir}")
        found = _scan_flow_dir(flow_dir)
        if not found["fwd"]:
            raise SequenceError(f"no forward flow files in {flow_dir}")
        table = {k: (v, found["bwd"].get(k)) for k, v in found["fwd"].items()}
        for k in found["bwd"]:
            table.setdefault(k, (None, found["bwd"][k]))
    elif isinstance(source, Mapping):
        table = dict(source)
    else:
        table = {i * delta_t: pair for i, pair in enumerate(source)}
    if not table:
        raise SequenceError("no flow fields given")

    base = min(table)
    last = max(k for k in table if (k - base) % delta_t == 0)
    forward, backward = [], []
    for frame in range(base, last + 1, delta_t):
        pair = table.get(frame, (None, None))
        for name, item in zip(("forward", "backward"), pair):
            if item is None:
                raise SequenceError(f"missing {name} flow for frame {frame}")
        forward.append(_as_field(pair[0]))
        backward.append(_as_field(pair[1]))

    shape = forward[0].shape
    for frame_off, (f, b) in enumerate(zip(forward, backward)):
        if f.shape != shape or b.shape != shape:
            raise SequenceError(
                f"dimension mismatch at frame {base + frame_off * delta_t}: "
                f"{f.shape}/{b.shape} vs {shape}"
            )
    return (
        FlowSequence(tuple(forward), FORWARD, delta_t, base),
        FlowSequence(tuple(backward), BACKWARD, delta_t, base),
    )


# --------------------------------------------------------------------------
# image I/O


def read_image(path) -> np.ndarray:
    """Load a PGM/PPM/PNG image as an ``uint8``/``uint16`` array."""
    from PIL import Image

    with Image.open(path) as im:
        return np.array(im)


def read_mask(path) -> BinaryMask:
    img = read_image(path)
    if img.ndim == 3:
        img = img[..., :3].max(axis=2)
    return BinaryMask(img > 0)


def write_mask(mask: BinaryMask, path) -> None:
    """Write a 1-bit PNG, or a binary PGM (0/255) for ``.pgm`` paths."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        h, w = mask.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write((mask.bits.astype(np.uint8) * 255).tobytes())
        return
    from PIL import Image

    Image.fromarray(mask.bits).convert("1").save(path)


def write_pgm16(values: np.ndarray, path) -> tuple[float, float]:
    """Min-max normalise ``values`` into a 16-bit PGM.

    The range is stored in ``<path>.txt`` as ``value_min``/``value_max`` so
    raw values can be recovered.  Returns ``(value_min, value_max)``.
    """
    path = Path(path)
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    scaled = np.zeros(values.shape) if span == 0 else (values - lo) / span
    data = np.round(scaled * 65535).astype(">u2")
    h, w = values.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())
    path.with_name(path.name + ".txt").write_text(f"value_min {lo!r}\nvalue_max {hi!r}\n")
    return lo, hi


def read_pgm16(path) -> np.ndarray:
    """Inverse of :func:`write_pgm16` up to 16-bit quantisation."""
    path = Path(path)
    raw = read_image(path).astype(np.float64)
    meta = dict(
        line.split() for line in path.with_name(path.name + ".txt").read_text().splitlines()
    )
    lo, hi = float(meta["value_min"]), float(meta["value_max"])
    return lo + raw / 65535.0 * (hi - lo)
