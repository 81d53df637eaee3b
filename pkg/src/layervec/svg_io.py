"""Deterministic SVG subset parser and writer for layered clipart documents.

The subset is exactly what the document model can hold: one closed subpath
per <path> element built from M/L/C/Z commands (absolute or relative), solid
fills, and translate/scale transforms, which are flattened into coordinates.
Everything else is rejected with a located, structured error rather than
silently degraded. The writer emits a canonical form (absolute commands,
6-decimal coordinates, #rrggbb fills, fixed attribute order) so that writing
is byte-stable and parse(write(doc)) reproduces the document exactly.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Iterable, Sequence

from .document import ClipartDocument, DocumentError, FillColor, Layer
from .geometry import (
    ClosedPath,
    CurveSegment,
    GeometryError,
    Point,
    SegmentKind,
    SNAP_TOLERANCE,
    cubic,
    line,
)


class SvgParseError(ValueError):
    """Structured parse failure; message names the construct and location."""


_BASIC_COLORS = {
    "black": "#000000",
    "silver": "#c0c0c0",
    "gray": "#808080",
    "grey": "#808080",
    "white": "#ffffff",
    "maroon": "#800000",
    "red": "#ff0000",
    "purple": "#800080",
    "fuchsia": "#ff00ff",
    "green": "#008000",
    "lime": "#00ff00",
    "olive": "#808000",
    "yellow": "#ffff00",
    "navy": "#000080",
    "blue": "#0000ff",
    "teal": "#008080",
    "aqua": "#00ffff",
}

_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
_TRANSFORM_RE = re.compile(r"([a-zA-Z]+)\s*\(([^)]*)\)")
_UNIT_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(px)?\s*$")


@dataclass(frozen=True)
class _Affine:
    """Axis-aligned affine map (scale then translate); all the subset allows."""

    sx: float = 1.0
    sy: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    def apply(self, x: float, y: float) -> tuple[float, float]:
        return self.sx * x + self.tx, self.sy * y + self.ty

    def apply_delta(self, dx: float, dy: float) -> tuple[float, float]:
        return self.sx * dx, self.sy * dy

    def then(self, child: "_Affine") -> "_Affine":
        return _Affine(
            self.sx * child.sx,
            self.sy * child.sy,
            self.sx * child.tx + self.tx,
            self.sy * child.ty + self.ty,
        )


def _strip_ns(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_length(value: str, what: str) -> float:
    m = _UNIT_RE.match(value)
    if not m:
        raise SvgParseError(f"cannot parse {what} {value!r}")
    return float(m.group(1))


def _parse_transform(text: str, where: str) -> _Affine:
    out = _Affine()
    consumed = 0
    for m in _TRANSFORM_RE.finditer(text):
        consumed += 1
        kind = m.group(1)
        args = [float(v) for v in _NUMBER_RE.findall(m.group(2))]
        if kind == "translate":
            if len(args) == 1:
                args.append(0.0)
            if len(args) != 2:
                raise SvgParseError(f"bad translate() arity in {where}")
            out = out.then(_Affine(tx=args[0], ty=args[1]))
        elif kind == "scale":
            if len(args) == 1:
                args.append(args[0])
            if len(args) != 2:
                raise SvgParseError(f"bad scale() arity in {where}")
            out = out.then(_Affine(sx=args[0], sy=args[1]))
        else:
            raise SvgParseError(f"unsupported transform '{kind}' in {where}")
    if consumed == 0 and text.strip():
        raise SvgParseError(f"unparseable transform {text!r} in {where}")
    return out


def _parse_fill(value: str | None, where: str) -> FillColor:
    if value is None:
        return FillColor(0.0, 0.0, 0.0)
    v = value.strip().lower()
    if v in _BASIC_COLORS:
        v = _BASIC_COLORS[v]
    if v.startswith("#"):
        try:
            return FillColor.from_hex(v)
        except (DocumentError, ValueError) as exc:
            raise SvgParseError(f"bad fill {value!r} in {where}: {exc}") from exc
    if v.startswith("rgb(") and v.endswith(")"):
        parts = [p.strip() for p in v[4:-1].split(",")]
        if len(parts) != 3:
            raise SvgParseError(f"bad rgb() fill {value!r} in {where}")
        chans = []
        for p in parts:
            if p.endswith("%"):
                chans.append(float(p[:-1]) * 255.0 / 100.0)
            else:
                chans.append(float(p))
        try:
            return FillColor(*(min(255.0, max(0.0, c)) / 255.0 for c in chans))
        except (DocumentError, ValueError) as exc:
            raise SvgParseError(f"bad rgb() fill {value!r} in {where}") from exc
    raise SvgParseError(f"unsupported fill {value!r} in {where}")


class _PathDataParser:
    """Tokenizer/executor for the M/L/C/Z subset of SVG path data."""

    def __init__(self, data: str, transform: _Affine, where: str):
        self.data = data
        self.pos = 0
        self.tf = transform
        self.where = where
        self.segments: list[CurveSegment] = []
        self.start: Point | None = None
        self.current: Point | None = None
        self.closed = False

    def fail(self, message: str) -> SvgParseError:
        return SvgParseError(f"{message} at offset {self.pos} in {self.where}")

    def _skip_separators(self) -> None:
        while self.pos < len(self.data) and self.data[self.pos] in " \t\r\n,":
            self.pos += 1

    def _next_number(self) -> float:
        self._skip_separators()
        m = _NUMBER_RE.match(self.data, self.pos)
        if not m:
            raise self.fail("expected a number")
        self.pos = m.end()
        return float(m.group(0))

    def _next_pair(self) -> tuple[float, float]:
        return self._next_number(), self._next_number()

    def _peek_number(self) -> bool:
        self._skip_separators()
        return _NUMBER_RE.match(self.data, self.pos) is not None

    def _abs_point(self, x: float, y: float, relative: bool) -> Point:
        if relative:
            if self.current is None:
                raise self.fail("relative command before any position")
            dx, dy = self.tf.apply_delta(x, y)
            return Point(self.current.x + dx, self.current.y + dy)
        return Point(*self.tf.apply(x, y))

    def _append_line(self, p: Point) -> None:
        assert self.current is not None
        self.segments.append(line(self.current, p))
        self.current = p

    def run(self) -> ClosedPath:
        while True:
            self._skip_separators()
            if self.pos >= len(self.data):
                break
            cmd = self.data[self.pos]
            if self.closed:
                raise self.fail("multiple subpaths are not supported")
            if cmd in "MmLlCcZz":
                self.pos += 1
                self._execute(cmd)
            elif cmd.isalpha():
                raise self.fail(f"unsupported path command {cmd!r}")
            else:
                raise self.fail(f"unexpected character {cmd!r}")
        if not self.closed:
            raise SvgParseError(f"unclosed path in {self.where} (missing Z)")
        if not self.segments:
            raise SvgParseError(f"empty path in {self.where}")
        try:
            return ClosedPath(tuple(self.segments))
        except GeometryError as exc:
            raise SvgParseError(f"bad path geometry in {self.where}: {exc}") from exc

    def _execute(self, cmd: str) -> None:
        relative = cmd.islower()
        op = cmd.upper()
        if op == "M":
            if self.start is not None:
                raise self.fail("multiple subpaths are not supported")
            x, y = self._next_pair()
            p = (
                self._abs_point(x, y, relative)
                if self.current is not None
                else Point(*self.tf.apply(x, y))
            )
            self.start = p
            self.current = p
            # Extra pairs after a moveto are implicit linetos.
            while self._peek_number():
                x, y = self._next_pair()
                self._append_line(self._abs_point(x, y, relative))
        elif op == "L":
            if self.current is None:
                raise self.fail("lineto before moveto")
            first = True
            while first or self._peek_number():
                first = False
                x, y = self._next_pair()
                self._append_line(self._abs_point(x, y, relative))
        elif op == "C":
            if self.current is None:
                raise self.fail("curveto before moveto")
            first = True
            while first or self._peek_number():
                first = False
                c1 = self._abs_point(*self._next_pair(), relative)
                c2 = self._abs_point(*self._next_pair(), relative)
                end = self._abs_point(*self._next_pair(), relative)
                self.segments.append(cubic(self.current, c1, c2, end))
                self.current = end
        else:  # Z
            if self.start is None or self.current is None or not self.segments:
                raise self.fail("closepath on an empty subpath")
            gap_x = self.current.x - self.start.x
            gap_y = self.current.y - self.start.y
            if (gap_x * gap_x + gap_y * gap_y) ** 0.5 > SNAP_TOLERANCE:
                self._append_line(self.start)
            self.closed = True


def parse_svg(data: bytes | str) -> ClipartDocument:
    """Parse the supported SVG subset into a document.

    Raises :class:`SvgParseError` for anything outside the subset, naming the
    offending construct and its location.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise SvgParseError(f"not well-formed XML: {exc}") from exc
    if _strip_ns(root.tag) != "svg":
        raise SvgParseError(f"root element is <{_strip_ns(root.tag)}>, expected <svg>")

    width_attr = root.get("width")
    height_attr = root.get("height")
    if width_attr is not None and height_attr is not None:
        width = _parse_length(width_attr, "width")
        height = _parse_length(height_attr, "height")
    else:
        viewbox = root.get("viewBox")
        if viewbox is None:
            raise SvgParseError("missing width/height and viewBox")
        nums = _NUMBER_RE.findall(viewbox)
        if len(nums) != 4:
            raise SvgParseError(f"bad viewBox {viewbox!r}")
        width, height = float(nums[2]), float(nums[3])
    if not (width > 0 and height > 0):
        raise SvgParseError(f"non-positive canvas {width}x{height}")

    layers: list[Layer] = []

    def walk(el: ET.Element, tf: _Affine, index_path: str) -> None:
        n_paths = 0
        for child in el:
            tag = _strip_ns(child.tag)
            if tag == "path":
                n_paths += 1
                where = f"path {len(layers) + 1}"
                child_tf = tf
                t_attr = child.get("transform")
                if t_attr:
                    child_tf = tf.then(_parse_transform(t_attr, where))
                d = child.get("d")
                if d is None:
                    raise SvgParseError(f"{where} has no path data")
                path = _PathDataParser(d, child_tf, where).run()
                color = _parse_fill(child.get("fill"), where)
                layers.append(Layer(path, color, id=child.get("id")))
            elif tag == "g":
                child_tf = tf
                t_attr = child.get("transform")
                if t_attr:
                    child_tf = tf.then(_parse_transform(t_attr, "group"))
                walk(child, child_tf, index_path)
            elif tag in ("title", "desc", "metadata", "defs"):
                continue
            else:
                raise SvgParseError(f"unsupported element <{tag}>")

    walk(root, _Affine(), "")
    try:
        return ClipartDocument(width, height, tuple(layers))
    except DocumentError as exc:
        raise SvgParseError(str(exc)) from exc


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def _path_data(path: ClosedPath) -> str:
    parts = [f"M {_fmt(path.segments[0].start.x)} {_fmt(path.segments[0].start.y)}"]
    for seg in path.segments:
        if seg.kind is SegmentKind.LINE:
            parts.append(f"L {_fmt(seg.end.x)} {_fmt(seg.end.y)}")
        else:
            _, c1, c2, end = seg.control
            parts.append(
                "C "
                + " ".join(_fmt(v) for v in (c1.x, c1.y, c2.x, c2.y, end.x, end.y))
            )
    parts.append("Z")
    return " ".join(parts)


def write_svg(doc: ClipartDocument) -> bytes:
    """Canonical SVG bytes: stable attribute order, absolute commands,
    6-decimal coordinates, #rrggbb fills."""
    lines = ['<?xml version="1.0" encoding="UTF-8"?>']
    lines.append(
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{_fmt(doc.width)}" height="{_fmt(doc.height)}" '
        f'viewBox="0 0 {_fmt(doc.width)} {_fmt(doc.height)}">'
    )
    for layer in doc.layers:
        id_attr = f' id="{layer.id}"' if layer.id is not None else ""
        lines.append(
            f'  <path{id_attr} d="{_path_data(layer.path)}" '
            f'fill="{layer.color.to_hex()}"/>'
        )
    lines.append("</svg>")
    return ("\n".join(lines) + "\n").encode("utf-8")


@dataclass(frozen=True)
class DatasetStats:
    """Histograms describing a document collection."""

    paths_per_clipart: dict[int, int]
    curves_per_path: dict[int, int]
    curve_type_counts: dict[str, int]

    @property
    def document_count(self) -> int:
        return sum(self.paths_per_clipart.values())


def dataset_stats(docs: Sequence[ClipartDocument] | Iterable[ClipartDocument]) -> DatasetStats:
    """Exact path-count, curve-count, and curve-type histograms."""
    docs = list(docs)
    if not docs:
        raise DocumentError("dataset_stats needs at least one document")
    paths: dict[int, int] = {}
    curves: dict[int, int] = {}
    types = {"line": 0, "cubic": 0, "other": 0}
    for doc in docs:
        paths[len(doc.layers)] = paths.get(len(doc.layers), 0) + 1
        for layer in doc.layers:
            k = len(layer.path)
            curves[k] = curves.get(k, 0) + 1
            for seg in layer.path.segments:
                types[seg.kind.value] += 1
    return DatasetStats(dict(sorted(paths.items())), dict(sorted(curves.items())), types)


def stats_to_csv(stats: DatasetStats) -> str:
    """CSV with one ``bucket,count`` section per histogram."""
    out = ["# paths_per_clipart", "bucket,count"]
    out += [f"{k},{v}" for k, v in stats.paths_per_clipart.items()]
    out += ["", "# curves_per_path", "bucket,count"]
    out += [f"{k},{v}" for k, v in stats.curves_per_path.items()]
    out += ["", "# curve_types", "bucket,count"]
    out += [f"{k},{v}" for k, v in stats.curve_type_counts.items()]
    return "\n".join(out) + "\n"


def format_stats(stats: DatasetStats) -> str:
    """Human-readable summary of the histograms."""
    n_paths = sum(k * v for k, v in stats.paths_per_clipart.items())
    n_curves = sum(k * v for k, v in stats.curves_per_path.items())
    lines = [
        f"documents: {stats.document_count}",
        f"paths: {n_paths}",
        f"curves: {n_curves}",
        "paths per clipart: "
        + ", ".join(f"{k}x{v}" for k, v in stats.paths_per_clipart.items()),
        "curves per path: "
        + ", ".join(f"{k}x{v}" for k, v in stats.curves_per_path.items()),
        "curve types: "
        + ", ".join(f"{k}={v}" for k, v in stats.curve_type_counts.items()),
    ]
    return "\n".join(lines)
