"""Command-line interface: ``geoprim {detect,lines,bench,gen-scene}``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields
from pathlib import Path

from PIL import Image

from . import __version__
from .benchmark import MODES, generate_scene, sweep
from .config import ConfigError, PipelineConfig, load_config, parse_value
from .export import write_detection_outputs, write_lines_outputs
from .pipeline import detect_ellipses, find_lines
from .raster import ImageFormatError, edge_map_from_image, load_raster

THREADS_ENV = "GEOPRIM_THREADS"

HELP = {
    "t_low": "low hysteresis threshold, fraction of max gradient",
    "t_high": "high hysteresis threshold, fraction of max gradient",
    "sigma": "Gaussian smoothing sigma in pixels",
    "equalize": "histogram-equalise before edge detection (true/false)",
    "min_contour_length": "drop contours shorter than this many pixels",
    "rdp_tol": "polyline fit tolerance in pixels",
    "theta0": "sharp-turn threshold in degrees",
    "p": "tangent secant half-width in pixels",
    "S": "triplets sampled per edge",
    "bin": "center bin size in pixels",
    "margin": "extra center region around the image in pixels",
    "d": "C2 window size in bins (odd)",
    "D": "maximum number of grouping merges per edge",
    "eps_b": "C1 bound on the fit residual (RMS, pixels)",
    "tol_conv": "associated-convexity tolerance in pixels",
    "region_mode": "search region of a group: 'longest' edge or 'all' edges",
    "single_edge": "evaluate an ungrouped edge alone: 'fallback' or only when it had no candidates ('empty')",
    "sim_tols": "similarity tolerance for all five parameter differences",
    "d0": "alignment distance threshold in pixels",
    "seed": "master random seed",
}


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline parameters")
    g.add_argument("--config", type=Path, help="flat 'key = value' file; flags override it")
    for f in fields(PipelineConfig):
        g.add_argument(f"--{f.name}", dest=f"cfg_{f.name}", metavar="VALUE", default=None,
                       help=f"{HELP.get(f.name, f.name)} (default: {f.default})")
    g.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or 1)")
    g.add_argument("--dump-config", type=Path, help="write the effective configuration here")


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {f.name: parse_value(f.name, getattr(args, f"cfg_{f.name}"))
                 for f in fields(PipelineConfig) if getattr(args, f"cfg_{f.name}") is not None}
    cfg = cfg.updated(**overrides)
    if args.dump_config:
        cfg.dump(args.dump_config)
    return cfg


def _threads(args) -> int:
    return args.threads if args.threads else default_threads()


def _load(path: Path, cfg: PipelineConfig):
    """(edge map, overlay background) for an input file."""
    data = load_raster(path)
    if data.dtype == bool:
        return data, data
    return edge_map_from_image(data, cfg.t_low, cfg.t_high, cfg.sigma, cfg.equalize), data


def cmd_detect(args) -> int:
    cfg = resolve_config(args)
    edges, background = _load(args.input, cfg)
    result = detect_ellipses(edges, cfg, _threads(args))
    write_detection_outputs(args.out, result, background)
    print(f"{len(result.detections)} ellipses ({len(result.hypotheses)} hypotheses, "
          f"{len(result.cues)} linear cues) -> {args.out}")
    return 0


def cmd_lines(args) -> int:
    cfg = resolve_config(args)
    edges, _ = _load(args.input, cfg)
    result = find_lines(edges, cfg)
    write_lines_outputs(args.out, result)
    print(f"{len(result.cues)} linear cues -> {args.out}")
    return 0


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _mode_list(text: str) -> list[str]:
    modes = [t.strip() for t in text.split(",") if t.strip()]
    bad = [m for m in modes if m not in MODES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown mode(s): {', '.join(bad)}")
    return modes


def cmd_bench(args) -> int:
    cfg = resolve_config(args)
    text = sweep(args.modes, args.alphas, args.n, cfg.seed, cfg, workers=_threads(args), gray=args.gray)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gen_scene(args) -> int:
    scene = generate_scene(args.alpha, args.mode, args.seed, gray=args.gray)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    pbm, js = scene.dump(args.out)
    if scene.gray is not None:
        Image.fromarray(scene.gray).save(args.out.with_suffix(".png"))
    print(f"wrote {pbm} and {js}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoprim", description="Edge contours, linear cues and ellipses from raster images.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect ellipses and write all artifacts")
    p.add_argument("input", type=Path, help="PNG/PGM image, or PBM edge map (1 = edge)")
    p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("lines", help="extract contours and linear cues only")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--out", type=Path, required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_lines)

    p = sub.add_parser("bench", help="synthetic precision/recall sweep (CSV)")
    p.add_argument("--modes", type=_mode_list, default=list(MODES), help="comma list of occluded,overlapping")
    p.add_argument("--alphas", type=_int_list, default=[4, 8, 12, 16, 20, 24], help="comma list of ellipse counts")
    p.add_argument("-n", type=int, default=100, help="scenes per (mode, alpha)")
    p.add_argument("--gray", action="store_true", help="render grayscale scenes and run the edge detector")
    p.add_argument("-o", "--out", type=Path, help="CSV path (default: stdout)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen-scene", help="write one synthetic scene as PBM + JSON truth")
    p.add_argument("--alpha", type=int, default=4)
    p.add_argument("--mode", choices=MODES, default="occluded")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gray", action="store_true", help="also write the grayscale rendering as PNG")
    p.add_argument("-o", "--out", type=Path, required=True, help="output path stem")
    p.set_defaults(func=cmd_gen_scene)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"geoprim: no such file: {exc.filename or exc}", file=sys.stderr)
        return 1
    except (ImageFormatError, ConfigError, ValueError) as exc:
        print(f"geoprim: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
