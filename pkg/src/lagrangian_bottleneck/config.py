"""Pipeline configuration with defaults, threshold strings and validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


def parse_threshold(value) -> tuple[str, float]:
    """``"p70"`` -> ``("percentile", 70.0)``; numbers -> ``("absolute", value)``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return "absolute", float(value)
    text = str(value).strip().lower()
    if text.startswith("p"):
        q = float(text[1:])
        if not 0 < q < 100:
            raise ConfigError(f"percentile threshold {value!r} outside (0, 100)")
        return "percentile", q
    return "absolute", float(text)


@dataclass
class PipelineConfig:
    delta_t: int = 4
    tau: int = 15
    tau_s: int = 5
    sigma_low: str | float = "p70"
    sigma_high: str | float = "p90"
    dilation_radius: int = 2
    # None -> 0.1 * (width + height)
    min_contour_length: float | None = None
    sigma_depth: float = 5.0
    sigma_s: float = 0.1
    sigma_r: float = 30.0
    sigma_o: int = 3
    flow_dir: str | None = None
    image_dir: str | None = None
    ground_truth: str | None = None
    output_dir: str | None = None

    def validate(self) -> "PipelineConfig":
        checks = [
            (self.delta_t >= 1, "delta_t must be >= 1"),
            (self.tau >= 1, "tau must be >= 1"),
            (self.tau_s >= 1, "tau_s must be >= 1"),
            (self.dilation_radius >= 0, "dilation_radius must be >= 0"),
            (self.min_contour_length is None or self.min_contour_length >= 0,
             "min_contour_length must be >= 0"),
            (self.sigma_depth >= 0, "sigma_depth must be >= 0"),
            (0 < self.sigma_s < 1, "sigma_s must lie in (0, 1)"),
            (self.sigma_r > 0, "sigma_r must be positive"),
            (self.sigma_o >= 1, "sigma_o must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        for name in ("sigma_low", "sigma_high"):
            try:
                parse_threshold(getattr(self, name))
            except ValueError as exc:
                raise ConfigError(f"{name}: {exc}") from exc
        return self

    def resolved_min_length(self, width: int, height: int) -> float:
        if self.min_contour_length is None:
            return 0.1 * (width + height)
        return float(self.min_contour_length)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
