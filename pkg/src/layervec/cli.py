"""Command-line interface binding the library into user workflows.

Commands are deterministic given their flags and seed. Machine-readable
key=value summaries go to stdout; diagnostics and seed echoes go to stderr.
An optional plain-text config file (key=value per line, # comments) is
merged under the flags: explicit flags always win.

Exit codes: 0 success, 2 bad arguments, 3 I/O failure, 4 fit divergence.
"""

from __future__ import annotations

import argparse
import glob as globlib
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .document import ClipartDocument
from .fitter import FitConfig, FitDivergence, evaluate_vectorization, gradient_check, vectorize
from .geometry import Point, SymmetryAxis
from .losses import LossWeights, geometric_loss
from .pathgen import GenConfig, GenerationError, emit_corpus
from .raster import read_image, render_document, write_png, write_ppm
from .regularize import RegularizeConfig, regularize
from .svg_io import (
    SvgParseError,
    dataset_stats,
    format_stats,
    parse_svg,
    stats_to_csv,
    write_svg,
)


class UsageError(ValueError):
    pass


def _parse_range(text: str) -> tuple[int, int]:
    parts = text.split("..")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_split(text: str) -> tuple[int, int]:
    parts = text.split("/")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected A/B, got {text!r}")
    return int(parts[0]), int(parts[1])


def _parse_axis(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected ox,oy,angle_deg, got {text!r}")
    return float(parts[0]), float(parts[1]), float(parts[2])


def _parse_schedule(text: str) -> tuple[tuple[int, float], ...]:
    pairs = []
    for item in text.split(";"):
        step, bw = item.split(":")
        pairs.append((int(step), float(bw)))
    return tuple(pairs)


@dataclass(frozen=True)
class Flag:
    name: str
    parse: Callable[[str], object]
    default: object
    help: str


def _read_config(path: Optional[str]) -> dict[str, str]:
    if path is None:
        return {}
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc}") from exc
    for ln, raw in enumerate(text.splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"config line {ln}: expected key=value, got {raw!r}")
        key, value = stripped.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _merge(args: argparse.Namespace, flags: Sequence[Flag]) -> dict[str, object]:
    config = _read_config(getattr(args, "config", None))
    out: dict[str, object] = {}
    known = {f.name.replace("-", "_") for f in flags}
    for key in config:
        if key not in known:
            raise UsageError(f"unknown config key {key!r}")
    for flag in flags:
        key = flag.name.replace("-", "_")
        value = getattr(args, key)
        if value is None and key in config:
            try:
                value = flag.parse(config[key])
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"bad config value for {flag.name}: {exc}") from exc
        if value is None:
            value = flag.default
        out[key] = value
    return out


def _add_flags(parser: argparse.ArgumentParser, flags: Sequence[Flag], required: Sequence[str] = ()) -> None:
    for flag in flags:
        kwargs: dict = {"help": flag.help, "default": None}
        if flag.parse is not bool:
            kwargs["type"] = flag.parse
        parser.add_argument(
            f"--{flag.name}", required=flag.name in required, **kwargs
        )
    parser.add_argument(
        "--config", default=None, help="key=value config file merged under flags"
    )


def _echo_seed(seed: int) -> None:
    print(f"seed={seed}", file=sys.stderr)


_VECTORIZE_FLAGS = [
    Flag("input", str, None, "input raster image (PNG or PPM)"),
    Flag("out", str, None, "output SVG path"),
    Flag("max-layers", int, 12, "maximum number of layers"),
    Flag("segs", int, 8, "cubic segments per fitted layer"),
    Flag("steps", int, 300, "optimization steps per layer"),
    Flag("step-size", float, 0.02, "optimizer step size (canvas-normalized)"),
    Flag("residual-stop", float, 0.01, "mean residual threshold to stop"),
    Flag("schedule", _parse_schedule, ((0, 2.0), (150, 1.0), (250, 0.5)),
         "bandwidth schedule, e.g. 0:2.0;150:1.0;250:0.5"),
    Flag("w-smooth", float, 0.1, "smoothness weight during fitting"),
    Flag("seed", int, 0, "random seed (echoed to stderr)"),
    Flag("dump-dir", str, None, "directory for per-iteration diagnostics"),
]


def cmd_vectorize(args: argparse.Namespace) -> int:
    opts = _merge(args, _VECTORIZE_FLAGS)
    if opts["input"] is None or opts["out"] is None:
        raise UsageError("--input and --out are required")
    _echo_seed(opts["seed"])
    target = read_image(opts["input"])
    cfg = FitConfig(
        max_layers=opts["max_layers"],
        residual_stop=opts["residual_stop"],
        seg_count=opts["segs"],
        opt_steps=opts["steps"],
        step_size=opts["step_size"],
        bandwidth_schedule=tuple(opts["schedule"]),
        weights=LossWeights(w_sym=1.0, w_smooth=opts["w_smooth"]),
        seed=opts["seed"],
    )
    doc = vectorize(target, cfg, dump_dir=opts["dump_dir"])
    Path(opts["out"]).write_bytes(write_svg(doc))
    metrics = evaluate_vectorization(doc, target)
    print(f"layers={int(metrics['layers'])}")
    print(f"diff={metrics['image_difference']:.6f}")
    print(f"out={opts['out']}")
    return 0


_GEN_FLAGS = [
    Flag("count", int, None, "number of corpus items"),
    Flag("out", str, None, "output directory"),
    Flag("curves", _parse_range, (3, 7), "curve count range, e.g. 3..7"),
    Flag("sym", float, 0.3, "probability a path is symmetric"),
    Flag("canvas", _parse_size, (64, 64), "canvas size WxH"),
    Flag("paths", int, 1, "paths per item (topmost recorded in the manifest)"),
    Flag("seed", int, 0, "base seed; item seeds are derived per index"),
    Flag("split", _parse_split, None, "train/test split sizes, e.g. 9000/1000"),
    Flag("threads", int, None, "worker processes (default: logical cores)"),
]


def cmd_gen(args: argparse.Namespace) -> int:
    opts = _merge(args, _GEN_FLAGS)
    if opts["count"] is None or opts["out"] is None:
        raise UsageError("--count and --out are required")
    _echo_seed(opts["seed"])
    cfg = GenConfig(
        curve_count_range=tuple(opts["curves"]),
        symmetric_prob=opts["sym"],
        canvas=tuple(opts["canvas"]),
        seed=opts["seed"],
    )
    threads = opts["threads"] if opts["threads"] is not None else os.cpu_count() or 1
    rows = emit_corpus(
        cfg,
        opts["count"],
        opts["out"],
        paths_per_item=opts["paths"],
        split=opts["split"],
        threads=threads,
    )
    print(f"count={len(rows)}")
    print(f"out={opts['out']}")
    return 0


_RENDER_FLAGS = [
    Flag("input", str, None, "input SVG"),
    Flag("out", str, None, "output image (.png or .ppm)"),
    Flag("size", _parse_size, None, "output size WxH"),
]


def cmd_render(args: argparse.Namespace) -> int:
    opts = _merge(args, _RENDER_FLAGS)
    if opts["input"] is None or opts["out"] is None or opts["size"] is None:
        raise UsageError("--input, --out and --size are required")
    doc = parse_svg(Path(opts["input"]).read_bytes())
    w, h = opts["size"]
    img = render_document(doc, w, h)
    out = str(opts["out"])
    if out.lower().endswith(".ppm") or out.lower().endswith(".pgm"):
        write_ppm(img, out)
    else:
        write_png(img, out)
    print(f"out={out}")
    return 0


_REGULARIZE_FLAGS = [
    Flag("input", str, None, "input SVG"),
    Flag("out", str, None, "output SVG"),
    Flag("angle-tol", float, 10.0, "axis/parallel angle tolerance (degrees)"),
    Flag("arc-tol", float, 0.5, "mean circle-fit deviation tolerance (canvas units)"),
    Flag("concentric-frac", float, 0.1, "center distance fraction of bbox side"),
    Flag("arc-samples", int, 64, "samples for circle detection"),
]


def cmd_regularize(args: argparse.Namespace) -> int:
    opts = _merge(args, _REGULARIZE_FLAGS)
    if opts["input"] is None or opts["out"] is None:
        raise UsageError("--input and --out are required")
    doc = parse_svg(Path(opts["input"]).read_bytes())
    cfg = RegularizeConfig(
        angle_tol=opts["angle_tol"],
        arc_dist_tol=opts["arc_tol"],
        concentric_frac=opts["concentric_frac"],
        arc_samples=opts["arc_samples"],
    )
    out_doc = regularize(doc, cfg)
    Path(opts["out"]).write_bytes(write_svg(out_doc))
    print(f"out={opts['out']}")
    return 0


_STATS_FLAGS = [
    Flag("inputs", str, None, "glob of SVG files"),
    Flag("out", str, None, "output CSV path"),
    Flag("fig", str, None, "histogram figure path (default: CSV path with .png)"),
]


def cmd_stats(args: argparse.Namespace) -> int:
    opts = _merge(args, _STATS_FLAGS)
    if opts["inputs"] is None or opts["out"] is None:
        raise UsageError("--inputs and --out are required")
    files = sorted(globlib.glob(opts["inputs"]))
    if not files:
        raise UsageError(f"no files match {opts['inputs']!r}")
    docs = [parse_svg(Path(f).read_bytes()) for f in files]
    stats = dataset_stats(docs)
    Path(opts["out"]).write_text(stats_to_csv(stats), encoding="utf-8")
    fig = opts["fig"] or str(Path(opts["out"]).with_suffix(".png"))
    from .report import save_stats_figure

    save_stats_figure(stats, fig)
    print(format_stats(stats), file=sys.stderr)
    print(f"documents={stats.document_count}")
    print(f"out={opts['out']}")
    print(f"fig={fig}")
    return 0


_LOSS_FLAGS = [
    Flag("pred", str, None, "predicted SVG (first path is scored)"),
    Flag("target", str, None, "target SVG (first path is scored)"),
    Flag("n", int, 200, "sample count per path"),
    Flag("axis", _parse_axis, None, "symmetry axis ox,oy,angle_deg"),
    Flag("w-sym", float, 1.0, "symmetry weight"),
    Flag("w-smooth", float, 0.1, "smoothness weight"),
]


def cmd_loss(args: argparse.Namespace) -> int:
    opts = _merge(args, _LOSS_FLAGS)
    if opts["pred"] is None or opts["target"] is None:
        raise UsageError("--pred and --target are required")
    pred_doc = parse_svg(Path(opts["pred"]).read_bytes())
    target_doc = parse_svg(Path(opts["target"]).read_bytes())
    if not pred_doc.layers or not target_doc.layers:
        raise UsageError("both documents must contain at least one path")
    axis = None
    if opts["axis"] is not None:
        ox, oy, deg = opts["axis"]
        axis = SymmetryAxis.from_angle(Point(ox, oy), math.radians(deg))
    weights = LossWeights(w_sym=opts["w_sym"], w_smooth=opts["w_smooth"])
    breakdown = geometric_loss(
        pred_doc.layers[0].path, target_doc.layers[0].path, axis, weights, opts["n"]
    )
    for key, value in breakdown.as_dict().items():
        print(f"{key}={value:.9g}")
    return 0


_GRADCHECK_FLAGS = [
    Flag("seed", int, 0, "random seed"),
    Flag("trials", int, 50, "number of random scenes"),
    Flag("size", int, 64, "canvas size"),
]


def cmd_gradcheck(args: argparse.Namespace) -> int:
    opts = _merge(args, _GRADCHECK_FLAGS)
    _echo_seed(opts["seed"])
    report = gradient_check(opts["seed"], opts["trials"], opts["size"])
    print(f"trials={opts['trials']}")
    print(f"coords={report['coords']}")
    print(f"frac_ok={report['frac_ok']:.6f}")
    print(f"max_rel_err={report['max_rel_err']:.6g}")
    ok = report["frac_ok"] >= 0.95
    print(f"pass={1 if ok else 0}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layervec",
        description="Layered vector clipart toolkit: vectorize, generate, render, "
        "regularize, and measure.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    table = [
        ("vectorize", "raster image to layered SVG", cmd_vectorize, _VECTORIZE_FLAGS),
        ("gen", "generate a random path corpus", cmd_gen, _GEN_FLAGS),
        ("render", "render an SVG to a raster image", cmd_render, _RENDER_FLAGS),
        ("regularize", "snap near-regular structure", cmd_regularize, _REGULARIZE_FLAGS),
        ("stats", "dataset histograms (CSV + figure)", cmd_stats, _STATS_FLAGS),
        ("loss", "geometric loss terms between two paths", cmd_loss, _LOSS_FLAGS),
        ("gradcheck", "validate rendering gradients", cmd_gradcheck, _GRADCHECK_FLAGS),
    ]
    for name, help_text, handler, flags in table:
        p = sub.add_parser(name, help=help_text)
        _add_flags(p, flags)
        p.set_defaults(handler=handler)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SvgParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FitDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
