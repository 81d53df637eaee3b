"""Random closed-path and canvas generation for corpus synthesis.

Paths are grown curve by curve with rejection sampling so they never
self-intersect. Symmetric paths are built constructively: half of the curve
budget is generated strictly on one side of a randomly oriented axis (using
the convex-hull property of cubics to keep curves on their side), then
mirrored, so the result is exactly mirror-invariant. Everything is a pure
function of (config, rng state); corpus emission derives one seed per item,
so output bytes are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Optional

import numpy as np

from .document import ClipartDocument, FillColor, Layer
from .geometry import (
    ClosedPath,
    CurveSegment,
    Point,
    SegmentKind,
    SymmetryAxis,
    cubic,
    line,
    polygonize,
    segments_intersect_any,
    self_intersects,
    shoelace_area,
)
from .raster import render_document
from .svg_io import write_svg

_MARGIN_FRAC = 0.08
_MIN_AREA_FRAC = 1e-3
_CURVE_RETRIES = 64
_PATH_RESTARTS = 1000
_CHECK_SAMPLES = 16


class GenerationError(RuntimeError):
    """Raised when a configuration cannot produce a valid path."""


@dataclass(frozen=True)
class GenConfig:
    curve_count_range: tuple[int, int] = (3, 7)
    symmetric_prob: float = 0.3
    canvas: tuple[int, int] = (64, 64)
    seed: int = 0
    color_mode: str = "random"

    def __post_init__(self) -> None:
        lo, hi = self.curve_count_range
        if not (1 <= lo <= hi):
            raise ValueError(f"bad curve count range {self.curve_count_range}")
        if not 0.0 <= self.symmetric_prob <= 1.0:
            raise ValueError(f"bad symmetric probability {self.symmetric_prob}")
        if self.canvas[0] < 1 or self.canvas[1] < 1:
            raise ValueError(f"bad canvas {self.canvas}")
        if self.color_mode not in ("random", "fixed"):
            raise ValueError(f"bad color mode {self.color_mode!r}")


def _segment_polyline(seg: CurveSegment, samples: int = _CHECK_SAMPLES) -> np.ndarray:
    ts = np.linspace(0.0, 1.0, samples + 1)
    ctrl = np.array([(p.x, p.y) for p in seg.control])
    if seg.kind is SegmentKind.LINE:
        w = np.stack([1.0 - ts, ts], axis=1)
    else:
        u = 1.0 - ts
        w = np.stack([u**3, 3 * u**2 * ts, 3 * u * ts**2, ts**3], axis=1)
    return w @ ctrl


def _chain_conflicts(chain: np.ndarray, candidate: np.ndarray) -> bool:
    """Does the candidate polyline cross itself or the accumulated chain?

    Both polylines are open; pairs sharing an exact endpoint (the junction
    between the last accepted curve and the candidate, or the closing point)
    are not crossings.
    """
    c0, c1 = candidate[:-1], candidate[1:]
    m = len(c0)
    if m >= 3:
        ii, jj = np.triu_indices(m, k=2)
        if segments_intersect_any(c0, c1, c0, c1, ii, jj):
            return True
    if len(chain) >= 2:
        e0, e1 = chain[:-1], chain[1:]
        ii = np.repeat(np.arange(m), len(e0))
        jj = np.tile(np.arange(len(e0)), m)
        if segments_intersect_any(c0, c1, e0, e1, ii, jj):
            return True
    return False


def _rand_point(rng: np.random.Generator, w: float, h: float) -> Point:
    mx, my = _MARGIN_FRAC * w, _MARGIN_FRAC * h
    return Point(
        float(rng.uniform(mx, w - mx)), float(rng.uniform(my, h - my))
    )


def _rand_segment(
    rng: np.random.Generator,
    start: Point,
    end: Point,
    kind: Optional[SegmentKind],
    point_sampler,
) -> CurveSegment:
    if kind is None:
        kind = SegmentKind.LINE if rng.random() < 0.5 else SegmentKind.CUBIC
    if kind is SegmentKind.LINE:
        return line(start, end)
    return cubic(start, point_sampler(), point_sampler(), end)


def _finalize(path: ClosedPath, w: float, h: float) -> bool:
    if self_intersects(path, _CHECK_SAMPLES):
        return False
    area = abs(shoelace_area(polygonize(path, _CHECK_SAMPLES)))
    return area >= _MIN_AREA_FRAC * w * h


def _generate_plain(
    rng: np.random.Generator, k: int, w: float, h: float
) -> Optional[ClosedPath]:
    sampler = lambda: _rand_point(rng, w, h)
    start = sampler()
    segments: list[CurveSegment] = []
    chain = np.array([(start.x, start.y)])
    current = start
    for i in range(k):
        closing = i == k - 1
        target = start if closing else None
        accepted = None
        for _ in range(_CURVE_RETRIES):
            end = target if target is not None else sampler()
            # A segment that returns to its own start must be a cubic loop.
            kind = SegmentKind.CUBIC if closing and end == current else None
            seg = _rand_segment(rng, current, end, kind, sampler)
            poly = _segment_polyline(seg)
            if not _chain_conflicts(chain, poly):
                accepted = (seg, poly)
                break
        if accepted is None:
            return None
        seg, poly = accepted
        segments.append(seg)
        chain = np.concatenate([chain, poly[1:]])
        current = seg.end
    path = ClosedPath(tuple(segments))
    return path if _finalize(path, w, h) else None


def _side_sampler(rng: np.random.Generator, axis: SymmetryAxis, w: float, h: float):
    """Sample points strictly on the positive side of the axis."""
    ox, oy = axis.origin.x, axis.origin.y
    dx, dy = axis.direction
    min_off = 0.02 * min(w, h)

    def sample() -> Point:
        for _ in range(256):
            p = _rand_point(rng, w, h)
            side = dx * (p.y - oy) - dy * (p.x - ox)
            if side > min_off:
                return p
        raise GenerationError("could not sample a point on the axis side")

    return sample


def _axis_point(rng: np.random.Generator, axis: SymmetryAxis, w: float, h: float) -> Point:
    """Random point exactly on the axis, inside the canvas margins."""
    ox, oy = axis.origin.x, axis.origin.y
    dx, dy = axis.direction
    reach = 0.5 * math.hypot(w, h)
    for _ in range(256):
        t = float(rng.uniform(-reach, reach))
        p = Point(ox + t * dx, oy + t * dy)
        mx, my = _MARGIN_FRAC * w, _MARGIN_FRAC * h
        if mx <= p.x <= w - mx and my <= p.y <= h - my:
            return p
    raise GenerationError("could not place a junction on the axis")


def _mirror_point_exact(p: Point, axis: SymmetryAxis) -> Point:
    ox, oy = axis.origin.x, axis.origin.y
    dx, dy = axis.direction
    vx, vy = p.x - ox, p.y - oy
    dot = vx * dx + vy * dy
    return Point(ox + 2 * dot * dx - vx, oy + 2 * dot * dy - vy)


def _mirror_segment(seg: CurveSegment, axis: SymmetryAxis, start: Point, end: Point) -> CurveSegment:
    """Mirrored, direction-reversed copy; endpoints are passed in exactly so
    junctions shared across the axis stay bit-identical."""
    if seg.kind is SegmentKind.LINE:
        return line(start, end)
    _, c1, c2, _ = seg.control
    return cubic(start, _mirror_point_exact(c2, axis), _mirror_point_exact(c1, axis), end)


def _generate_symmetric(
    rng: np.random.Generator, k: int, w: float, h: float
) -> Optional[tuple[ClosedPath, SymmetryAxis]]:
    angle = float(rng.uniform(0.0, math.pi))
    cx = w / 2 + float(rng.uniform(-0.1 * w, 0.1 * w))
    cy = h / 2 + float(rng.uniform(-0.1 * h, 0.1 * h))
    axis = SymmetryAxis.from_angle(Point(cx, cy), angle)
    sampler = _side_sampler(rng, axis, w, h)

    half = k // 2
    odd = k % 2 == 1
    j_start = _axis_point(rng, axis, w, h)
    junctions = [j_start]
    if odd:
        inner = half
    else:
        inner = half - 1
    for _ in range(inner):
        junctions.append(sampler())
    if not odd:
        for _ in range(_CURVE_RETRIES):
            j_end = _axis_point(rng, axis, w, h)
            if j_end != j_start:
                break
        junctions.append(j_end)

    chain_segs: list[CurveSegment] = []
    chain = np.array([(j_start.x, j_start.y)])
    for i in range(len(junctions) - 1):
        a, b = junctions[i], junctions[i + 1]
        on_axis_pair = i == 0 and len(junctions) == 2 and not odd
        accepted = None
        for _ in range(_CURVE_RETRIES):
            kind = SegmentKind.CUBIC if on_axis_pair else None
            seg = _rand_segment(rng, a, b, kind, sampler)
            poly = _segment_polyline(seg)
            if not _chain_conflicts(chain, poly):
                accepted = (seg, poly)
                break
        if accepted is None:
            return None
        seg, poly = accepted
        chain_segs.append(seg)
        chain = np.concatenate([chain, poly[1:]])

    segments = list(chain_segs)
    mirrored_junctions = [_mirror_point_exact(p, axis) for p in junctions]
    if odd:
        tip = junctions[-1]
        tip_m = mirrored_junctions[-1]
        for _ in range(_CURVE_RETRIES):
            if k == 1 or rng.random() < 0.5:
                c1 = sampler()
                bridge = cubic(tip, c1, _mirror_point_exact(c1, axis), tip_m)
            else:
                bridge = line(tip, tip_m)
            poly = _segment_polyline(bridge)
            if not _chain_conflicts(chain, poly):
                segments.append(bridge)
                break
        else:
            return None
    # Mirrored half, reversed: traverses back from the far junction to the
    # start. Junction coordinates are reused exactly, so closure is exact.
    if odd:
        rev_points = mirrored_junctions[:0:-1] + [junctions[0]]
    else:
        rev_points = [junctions[-1]] + mirrored_junctions[-2:0:-1] + [junctions[0]]
    for idx, seg in enumerate(reversed(chain_segs)):
        start = rev_points[idx]
        end = rev_points[idx + 1]
        segments.append(_mirror_segment(seg, axis, start, end))

    path = ClosedPath(tuple(segments))
    if not _finalize(path, w, h):
        return None
    return path, axis


def random_closed_path(
    cfg: GenConfig, rng: np.random.Generator
) -> tuple[ClosedPath, Optional[SymmetryAxis]]:
    """One random closed path without self-intersection.

    Returns the path and, when the symmetric branch was taken, the axis the
    path is mirror-invariant about.
    """
    w, h = float(cfg.canvas[0]), float(cfg.canvas[1])
    lo, hi = cfg.curve_count_range
    for _ in range(_PATH_RESTARTS):
        k = int(rng.integers(lo, hi + 1))
        symmetric = rng.random() < cfg.symmetric_prob
        if symmetric:
            out = _generate_symmetric(rng, k, w, h)
            if out is not None:
                return out
        else:
            path = _generate_plain(rng, k, w, h)
            if path is not None:
                return path, None
    raise GenerationError(
        f"no valid path after {_PATH_RESTARTS} restarts (config {cfg})"
    )


def _rand_color(cfg: GenConfig, rng: np.random.Generator) -> FillColor:
    if cfg.color_mode == "fixed":
        return FillColor(0.0, 0.0, 0.0)
    r, g, b = rng.random(3)
    return FillColor(float(r), float(g), float(b))


def random_canvas(cfg: GenConfig, k: int, rng: np.random.Generator) -> ClipartDocument:
    """Document with k independent random layers; the last layer is topmost."""
    if k < 1:
        raise ValueError("need at least one path")
    layers = []
    for _ in range(k):
        path, _ = random_closed_path(cfg, rng)
        layers.append(Layer(path, _rand_color(cfg, rng)))
    return ClipartDocument(float(cfg.canvas[0]), float(cfg.canvas[1]), tuple(layers))


@dataclass(frozen=True)
class ManifestRow:
    index: int
    seed: int
    symmetric: bool
    axis_origin: Optional[tuple[float, float]]
    axis_angle: Optional[float]
    k_curves: int
    color_hex: str

    def to_line(self) -> str:
        if self.symmetric and self.axis_origin is not None:
            origin = f"{self.axis_origin[0]:.6f},{self.axis_origin[1]:.6f}"
            angle = f"{self.axis_angle:.6f}"
        else:
            origin = "-"
            angle = "-"
        return "\t".join(
            [
                str(self.index),
                str(self.seed),
                "1" if self.symmetric else "0",
                origin,
                angle,
                str(self.k_curves),
                self.color_hex,
            ]
        )


def item_seed(base_seed: int, index: int) -> int:
    return (base_seed ^ index) & 0xFFFFFFFFFFFFFFFF


def generate_item(
    cfg: GenConfig, index: int, paths_per_item: int = 1
) -> tuple[ClipartDocument, ManifestRow]:
    """Deterministic corpus item: document plus its manifest row.

    With multiple paths per item, the manifest describes the topmost layer
    (the one a consumer would be asked to reproduce next).
    """
    seed = item_seed(cfg.seed, index)
    rng = np.random.default_rng(seed)
    if paths_per_item == 1:
        path, axis = random_closed_path(cfg, rng)
        color = _rand_color(cfg, rng)
        doc = ClipartDocument(
            float(cfg.canvas[0]), float(cfg.canvas[1]), (Layer(path, color),)
        )
        top_path, top_axis, top_color = path, axis, color
    else:
        layers = []
        top_axis = None
        for _ in range(paths_per_item):
            path, axis = random_closed_path(cfg, rng)
            color = _rand_color(cfg, rng)
            layers.append(Layer(path, color))
            top_axis = axis
        doc = ClipartDocument(float(cfg.canvas[0]), float(cfg.canvas[1]), tuple(layers))
        top_path, top_color = layers[-1].path, layers[-1].color
    row = ManifestRow(
        index=index,
        seed=seed,
        symmetric=top_axis is not None,
        axis_origin=(top_axis.origin.x, top_axis.origin.y) if top_axis else None,
        axis_angle=top_axis.angle if top_axis else None,
        k_curves=len(top_path),
        color_hex=top_color.to_hex(),
    )
    return doc, row


MANIFEST_HEADER = "index\tseed\tsymmetric\taxis_origin\taxis_angle\tk_curves\tcolor_hex"


def _item_payload(
    cfg: GenConfig, index: int, paths_per_item: int
) -> tuple[int, bytes, bytes, ManifestRow]:
    from .raster import png_bytes

    doc, row = generate_item(cfg, index, paths_per_item)
    img = render_document(doc, cfg.canvas[0], cfg.canvas[1])
    return index, write_svg(doc), png_bytes(img), row


def emit_corpus(
    cfg: GenConfig,
    count: int,
    out_dir: str | FsPath,
    paths_per_item: int = 1,
    split: Optional[tuple[int, int]] = None,
    threads: int = 1,
) -> list[ManifestRow]:
    """Write `count` PNG+SVG pairs and a tab-separated manifest.

    With ``split=(n_train, n_test)`` two index list files are written as
    well; the first n_train items are the training split. Items carry seeds
    derived from (base seed, index), so any worker count produces identical
    bytes.
    """
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if split is not None and split[0] + split[1] != count:
        raise ValueError(f"split {split} does not sum to count {count}")
    if threads > 1 and count > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as pool:
            payloads = list(
                pool.map(
                    _item_payload,
                    [cfg] * count,
                    range(count),
                    [paths_per_item] * count,
                    chunksize=max(1, count // (threads * 4)),
                )
            )
    else:
        payloads = [_item_payload(cfg, i, paths_per_item) for i in range(count)]
    rows = []
    for i, svg, png, row in payloads:
        rows.append(row)
        stem = f"item_{i:05d}"
        (out / f"{stem}.svg").write_bytes(svg)
        (out / f"{stem}.png").write_bytes(png)
    manifest = MANIFEST_HEADER + "\n" + "\n".join(r.to_line() for r in rows) + "\n"
    (out / "manifest.tsv").write_text(manifest, encoding="utf-8")
    if split is not None:
        n_train = split[0]
        train = "\n".join(f"item_{i:05d}" for i in range(n_train))
        test = "\n".join(f"item_{i:05d}" for i in range(n_train, count))
        (out / "train.txt").write_text(train + "\n", encoding="utf-8")
        (out / "test.txt").write_text(test + "\n", encoding="utf-8")
    return rows
