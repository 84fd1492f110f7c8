"""Command line entry point: ``synth``, ``detect``, ``eval`` and ``render``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, PipelineConfig
from .evaluate import GroundTruthError, MetricReport, accuracy_sweep, read_ground_truth
from .fields import FlowFormatError, SequenceError, build_sequences, read_image, write_mask, write_pgm16
from .pipeline import BottleneckDetector, FrameResult, format_detection, read_detections
from .synth import KINDS, Scenario, generate

log = logging.getLogger("lagrangian_bottleneck")

DETECTIONS_FILE = "detections.txt"
RUN_FILE = "run.json"
CONFIG_FILE = "config.json"
THRESHOLDS_FILE = "thresholds.csv"
DEFAULT_THRESHOLDS = tuple(round(0.1 * k, 1) for k in range(0, 31))

EXIT_CODES = {"config": 2, "input": 3, "format": 4, "io": 5}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


# --------------------------------------------------------------------------
# drivers


def _ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_sequences(config: PipelineConfig):
    if not config.flow_dir:
        raise CliError("config", "flow_dir is required")
    try:
        return build_sequences(config.flow_dir, config.delta_t)
    except FlowFormatError as exc:
        raise CliError("format", str(exc)) from exc
    except SequenceError as exc:
        raise CliError("input", str(exc)) from exc


def run_detect(config: PipelineConfig, debug: bool = False) -> list[FrameResult]:
    """Run detection over ``config.flow_dir`` and write records into ``config.output_dir``."""
    try:
        config.validate()
    except ConfigError as exc:
        raise CliError("config", str(exc)) from exc
    if not config.output_dir:
        raise CliError("config", "output_dir is required")
    forward, backward = _load_sequences(config)
    out = _ensure_dir(config.output_dir)
    h, w = forward.shape
    resolved = dict(config.to_dict(), min_contour_length=config.resolved_min_length(w, h))
    (out / CONFIG_FILE).write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")

    results = []
    lines, threshold_rows = [], []
    for result in BottleneckDetector(config).run(forward, backward):
        results.append(result)
        if result.evaluated:
            t = result.ridges.thresholds
            threshold_rows.append(f"{result.frame},{t['sigma_low']!r},{t['sigma_high']!r}")
            if debug:
                _write_debug(out / "debug", result)
        lines.extend(format_detection(d) for d in result.confirmed)

    (out / DETECTIONS_FILE).write_text("".join(line + "\n" for line in lines))
    (out / THRESHOLDS_FILE).write_text(
        "frame,sigma_low,sigma_high\n" + "".join(r + "\n" for r in threshold_rows)
    )
    evaluated = [r.frame for r in results if r.evaluated]
    run_info = {
        "frames": [r.frame for r in results],
        "evaluated_frames": evaluated,
        "width": w,
        "height": h,
        "detections": len(lines),
    }
    (out / RUN_FILE).write_text(json.dumps(run_info, indent=2) + "\n")
    log.info("%d reference frames, %d evaluated, %d confirmed detections",
             len(results), len(evaluated), len(lines))
    return results


def _write_debug(debug_dir: Path, result: FrameResult) -> None:
    debug_dir = _ensure_dir(debug_dir)
    stem = f"{result.frame:06d}"
    write_pgm16(result.filtered_fwd.values, debug_dir / f"ftle_fwd_{stem}.pgm")
    write_pgm16(result.filtered_bwd.values, debug_dir / f"ftle_bwd_{stem}.pgm")
    write_mask(result.ridges.m_seg, debug_dir / f"m_seg_{stem}.png")
    write_mask(result.ridges.m_val, debug_dir / f"m_val_{stem}.png")


def parse_frames(text: str) -> list[int]:
    """``"a-b"`` or ``"a-b:step"`` (inclusive) or a comma separated list."""
    text = text.strip()
    if "-" in text and "," not in text:
        span, _, step = text.partition(":")
        lo, hi = (int(v) for v in span.split("-"))
        return list(range(lo, hi + 1, int(step) if step else 1))
    return [int(v) for v in text.split(",") if v.strip()]


def run_eval(detections_path, gt_path, thresholds, out_dir, frames=None) -> MetricReport:
    """Write ``sweep.csv`` and ``detection_errors.csv`` for one sequence."""
    detections_path = Path(detections_path)
    try:
        gt = read_ground_truth(gt_path)
    except FileNotFoundError as exc:
        raise CliError("input", f"ground truth not found: {exc.filename}") from exc
    except GroundTruthError as exc:
        raise CliError("format", str(exc)) from exc
    try:
        detections = read_detections(detections_path)
    except FileNotFoundError as exc:
        raise CliError("input", f"detections not found: {detections_path}") from exc
    except ValueError as exc:
        raise CliError("format", str(exc)) from exc
    if frames is None:
        run_file = detections_path.parent / RUN_FILE
        if not run_file.exists():
            raise CliError("input", f"no {RUN_FILE} next to detections; pass --frames")
        frames = json.loads(run_file.read_text())["evaluated_frames"]
    report = accuracy_sweep(detections, gt, thresholds, frames)
    out = _ensure_dir(out_dir)
    report.write(out / "sweep.csv", out / "detection_errors.csv")
    return report


def _background(result: FrameResult, image_dir) -> np.ndarray:
    if image_dir:
        for ext in ("png", "pgm", "ppm"):
            hits = sorted(Path(image_dir).glob(f"*{result.frame:06d}.{ext}"))
            if hits:
                img = read_image(hits[0])
                if img.ndim == 2:
                    img = np.repeat(img[..., None], 3, axis=2)
                return img[..., :3].astype(np.uint8)
    values = result.filtered_fwd.values + result.filtered_bwd.values
    span = values.max() - values.min()
    gray = np.zeros(values.shape) if span == 0 else (values - values.min()) / span
    return np.repeat((gray * 255).astype(np.uint8)[..., None], 3, axis=2)


def render_overlay(result: FrameResult, path, image_dir=None) -> None:
    """Contours (green), hulls (blue), defects (magenta) and detections (red)."""
    from PIL import Image, ImageDraw

    img = Image.fromarray(_background(result, image_dir))
    draw = ImageDraw.Draw(img)
    for contour in result.contours:
        pts = [tuple(map(float, p)) for p in contour.points]
        draw.line(pts + pts[:1], fill=(0, 200, 0))
        hull = [pts[i] for i in contour.hull]
        if len(hull) > 1:
            draw.line(hull + hull[:1], fill=(60, 120, 255))
        for d in contour.defects:
            x, y = pts[d.farthest]
            draw.ellipse([x - 2, y - 2, x + 2, y + 2], outline=(220, 0, 220))
    for det in result.detections:
        x, y = det.center
        colour = (255, 0, 0) if any(c.center == det.center for c in result.confirmed) else (255, 160, 0)
        draw.line([det.pair.p0, det.pair.p1], fill=colour)
        draw.ellipse([x - 3, y - 3, x + 3, y + 3], outline=colour)
    img.save(path)


def run_render(config: PipelineConfig, out_dir, detections_path=None, gt_path=None, thresholds=DEFAULT_THRESHOLDS):
    """Overlay PNGs for every evaluated frame, and an accuracy curve if ``gt_path`` is given."""
    out = _ensure_dir(out_dir)
    if config.flow_dir:
        forward, backward = _load_sequences(config)
        for result in BottleneckDetector(config.validate()).run(forward, backward):
            if result.evaluated:
                render_overlay(result, out / f"overlay_{result.frame:06d}.png", config.image_dir)
    if gt_path is not None:
        if detections_path is None:
            raise CliError("config", "an accuracy curve needs --detections")
        report = run_eval(detections_path, gt_path, thresholds, out)
        with open(out / "curve.csv", "w") as fh:
            fh.write("epsilon,accuracy\n")
            for row in report.rows:
                fh.write(f"{row.epsilon:g},{row.accuracy:.6f}\n")


# --------------------------------------------------------------------------
# argument handling

_CONFIG_FLAGS = {
    "delta_t": int,
    "tau": int,
    "tau_s": int,
    "sigma_low": str,
    "sigma_high": str,
    "dilation_radius": int,
    "min_contour_length": float,
    "sigma_depth": float,
    "sigma_s": float,
    "sigma_r": float,
    "sigma_o": int,
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--flow-dir")
    p.add_argument("--image-dir")
    for name, typ in _CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)


def _threshold_value(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def config_from_args(args) -> PipelineConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise CliError("input", f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise CliError("config", f"{args.config}: {exc}") from exc
    for name in _CONFIG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = _threshold_value(value) if name in ("sigma_low", "sigma_high") else value
    for name in ("flow_dir", "image_dir"):
        if getattr(args, name, None):
            data[name] = getattr(args, name)
    if getattr(args, "out", None):
        data["output_dir"] = args.out
    try:
        return PipelineConfig.from_dict(data).validate()
    except (ConfigError, TypeError) as exc:
        raise CliError("config", str(exc)) from exc


def _thresholds(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lagrangian-bottleneck", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic flow scene")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=120)
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--u", type=float, default=0.0)
    p.add_argument("--v", type=float, default=0.0)
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--gap-center", type=float)
    p.add_argument("--gap-width", type=float, default=16.0)
    p.add_argument("--wall-x", type=float, default=100.0)
    p.add_argument("--speed", type=float, default=2.0)
    p.add_argument("--onset", type=int, default=0)
    p.add_argument("--delta-t", type=int, default=4)
    p.add_argument("--tau-s", type=int, default=5)
    p.add_argument("--sigma-o", type=int, default=3)

    p = sub.add_parser("detect", help="run the detector over a flow directory")
    _add_config_flags(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--debug", action="store_true", help="also write FTLE fields and masks")

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--detections", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--thresholds", type=_thresholds, default=list(DEFAULT_THRESHOLDS))
    p.add_argument("--frames", type=parse_frames, help="evaluated frames, e.g. 76-240:4")
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", help="overlay images and accuracy curves")
    _add_config_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--detections")
    p.add_argument("--gt")
    p.add_argument("--thresholds", type=_thresholds, default=list(DEFAULT_THRESHOLDS))
    return parser


def _dispatch(args) -> None:
    if args.command == "synth":
        try:
            sc = Scenario(
                args.kind, args.width, args.height, args.frames, u=args.u, v=args.v, a=args.a,
                gap_center=args.gap_center, gap_width=args.gap_width, wall_x=args.wall_x,
                speed=args.speed, onset_frame=args.onset,
            )
        except ValueError as exc:
            raise CliError("config", str(exc)) from exc
        generate(sc, args.out, args.delta_t, args.tau_s, args.sigma_o)
    elif args.command == "detect":
        run_detect(config_from_args(args), debug=args.debug)
    elif args.command == "eval":
        report = run_eval(args.detections, args.gt, args.thresholds, args.out, args.frames)
        for row in report.rows:
            print(f"epsilon={row.epsilon:g} accuracy={row.accuracy:.4f}")
    elif args.command == "render":
        config = config_from_args(argparse.Namespace(**{**vars(args), "out": None}))
        run_render(config, args.out, args.detections, args.gt, args.thresholds)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        _dispatch(args)
    except CliError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]
    return 0


if __name__ == "__main__":
    sys.exit(main())
