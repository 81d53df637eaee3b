"""Curve and closed-path geometry: evaluation, sampling, mirroring, intersection.

Paths are ordered loops of line and cubic Bezier segments. Consecutive
segments share their junction point exactly (enforced by snapping at
construction), so closure can be tested with zero tolerance. All types are
immutable values and every operation is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

SNAP_TOLERANCE = 1e-6
DEFAULT_POLY_SAMPLES = 16


class GeometryError(ValueError):
    """A geometric contract was violated (bad parameter, open path, ...)."""


class SegmentKind(Enum):
    LINE = "line"
    CUBIC = "cubic"


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array((self.x, self.y), dtype=float)


@dataclass(frozen=True)
class CurveSegment:
    """A line (2 control points) or cubic Bezier (4 control points)."""

    kind: SegmentKind
    control: tuple[Point, ...]

    def __post_init__(self) -> None:
        expected = 2 if self.kind is SegmentKind.LINE else 4
        if len(self.control) != expected:
            raise GeometryError(
                f"{self.kind.value} segment needs {expected} control points, "
                f"got {len(self.control)}"
            )

    @property
    def start(self) -> Point:
        return self.control[0]

    @property
    def end(self) -> Point:
        return self.control[-1]


def line(a: Point, b: Point) -> CurveSegment:
    return CurveSegment(SegmentKind.LINE, (a, b))


def cubic(a: Point, c1: Point, c2: Point, b: Point) -> CurveSegment:
    return CurveSegment(SegmentKind.CUBIC, (a, c1, c2, b))


def _dist(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class ClosedPath:
    """Ordered loop of segments; end of each segment equals the next start.

    Gaps up to ``SNAP_TOLERANCE`` are snapped at construction (the start of
    the following segment wins); larger gaps are construction errors.
    """

    segments: tuple[CurveSegment, ...]

    def __post_init__(self) -> None:
        segs = tuple(self.segments)
        if len(segs) < 1:
            raise GeometryError("a closed path needs at least one segment")
        n = len(segs)
        snapped = []
        for k, seg in enumerate(segs):
            nxt = segs[(k + 1) % n]
            gap = _dist(seg.end, nxt.start)
            if gap > SNAP_TOLERANCE:
                raise GeometryError(
                    f"segments {k} and {(k + 1) % n} leave a gap of {gap:g} "
                    f"(snap tolerance {SNAP_TOLERANCE:g})"
                )
            if seg.end != nxt.start:
                seg = CurveSegment(seg.kind, seg.control[:-1] + (nxt.start,))
            snapped.append(seg)
        object.__setattr__(self, "segments", tuple(snapped))

    def __len__(self) -> int:
        return len(self.segments)

    def junctions(self) -> list[Point]:
        return [seg.start for seg in self.segments]

    def kinds(self) -> tuple[SegmentKind, ...]:
        return tuple(seg.kind for seg in self.segments)

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) over all control points."""
        xs = [p.x for seg in self.segments for p in seg.control]
        ys = [p.y for seg in self.segments for p in seg.control]
        return min(xs), min(ys), max(xs), max(ys)


def polygon_path(points: Sequence[Point]) -> ClosedPath:
    """Closed path of straight lines through the given vertices."""
    if len(points) < 3:
        raise GeometryError("a polygon needs at least 3 vertices")
    segs = [line(points[i], points[(i + 1) % len(points)]) for i in range(len(points))]
    return ClosedPath(tuple(segs))


@dataclass(frozen=True)
class SymmetryAxis:
    """A mirror line given by an origin point and a unit direction."""

    origin: Point
    direction: tuple[float, float]

    def __post_init__(self) -> None:
        dx, dy = self.direction
        norm = math.hypot(dx, dy)
        if norm < 1e-12:
            raise GeometryError("axis direction must be nonzero")
        if abs(norm - 1.0) > 1e-12:
            object.__setattr__(self, "direction", (dx / norm, dy / norm))

    @classmethod
    def from_angle(cls, origin: Point, angle: float) -> "SymmetryAxis":
        return cls(origin, (math.cos(angle), math.sin(angle)))

    @property
    def angle(self) -> float:
        return math.atan2(self.direction[1], self.direction[0])

    def reflection_matrix(self) -> np.ndarray:
        """2x2 reflection across the axis direction (symmetric, involutive)."""
        dx, dy = self.direction
        return np.array(
            [[dx * dx - dy * dy, 2.0 * dx * dy], [2.0 * dx * dy, dy * dy - dx * dx]]
        )


@dataclass(frozen=True, eq=False)
class SamplePolyline:
    """Ordered samples along a path, with per-point (segment, t) provenance."""

    points: np.ndarray
    segment_index: np.ndarray
    parameter: np.ndarray
    path: ClosedPath

    def __post_init__(self) -> None:
        for arr in (self.points, self.segment_index, self.parameter):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)


def _bezier_weights(t: float) -> tuple[float, float, float, float]:
    u = 1.0 - t
    return (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t)


def eval_curve(seg: CurveSegment, t: float) -> Point:
    """Parametric point on a segment at t in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise GeometryError(f"parameter t={t} outside [0, 1]")
    if seg.kind is SegmentKind.LINE:
        a, b = seg.control
        return Point((1.0 - t) * a.x + t * b.x, (1.0 - t) * a.y + t * b.y)
    w = _bezier_weights(t)
    x = sum(wi * p.x for wi, p in zip(w, seg.control))
    y = sum(wi * p.y for wi, p in zip(w, seg.control))
    return Point(x, y)


def split_counts(n: int, k: int) -> list[int]:
    """Distribute n samples over k segments; remainder goes to the earliest."""
    base, rem = divmod(n, k)
    return [base + 1 if i < rem else base for i in range(k)]


class PathParamSpace:
    """Flat coordinate layout over a path's unique control points.

    The first K rows are the junction points (the start of each segment);
    each cubic then contributes its two interior handles. Rebuilding a path
    from any parameter array is closed by construction, which makes this the
    natural space for optimization and for batch sampling.
    """

    def __init__(self, kinds: Sequence[SegmentKind]):
        self.kinds = tuple(kinds)
        k = len(self.kinds)
        if k < 1:
            raise GeometryError("empty segment list")
        self._handle_base: dict[int, int] = {}
        idx = k
        for i, kind in enumerate(self.kinds):
            if kind is SegmentKind.CUBIC:
                self._handle_base[i] = idx
                idx += 2
        self.n_segments = k
        self.n_points = idx

    @classmethod
    def of(cls, path: ClosedPath) -> "PathParamSpace":
        return cls(path.kinds())

    def cubic_handles(self, segment: int) -> tuple[int, int]:
        """Parameter rows of a cubic segment's two interior handles."""
        base = self._handle_base[segment]
        return base, base + 1

    def params(self, path: ClosedPath) -> np.ndarray:
        """(n_points, 2) array of the path's unique control coordinates."""
        if path.kinds() != self.kinds:
            raise GeometryError("path structure does not match this space")
        theta = np.empty((self.n_points, 2))
        for i, seg in enumerate(path.segments):
            theta[i] = (seg.start.x, seg.start.y)
            if seg.kind is SegmentKind.CUBIC:
                base = self._handle_base[i]
                theta[base] = (seg.control[1].x, seg.control[1].y)
                theta[base + 1] = (seg.control[2].x, seg.control[2].y)
        return theta

    def path(self, theta: np.ndarray) -> ClosedPath:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_points, 2):
            raise GeometryError(
                f"expected parameter shape {(self.n_points, 2)}, got {theta.shape}"
            )
        k = self.n_segments
        segs = []
        for i, kind in enumerate(self.kinds):
            a = Point(*theta[i])
            b = Point(*theta[(i + 1) % k])
            if kind is SegmentKind.LINE:
                segs.append(line(a, b))
            else:
                base = self._handle_base[i]
                segs.append(cubic(a, Point(*theta[base]), Point(*theta[base + 1]), b))
        return ClosedPath(tuple(segs))

    def sampling_matrix(self, counts: Sequence[int]) -> np.ndarray:
        """Weights mapping parameters to samples at t = j/m per segment.

        Returns a (sum(counts), n_points) matrix W with samples = W @ params.
        The half-open grid never duplicates junction points.
        """
        if len(counts) != self.n_segments:
            raise GeometryError("one sample count per segment required")
        total = int(sum(counts))
        w = np.zeros((total, self.n_points))
        row = 0
        k = self.n_segments
        for i, kind in enumerate(self.kinds):
            m = int(counts[i])
            if m < 1:
                raise GeometryError("each segment needs at least one sample")
            ts = np.arange(m) / m
            nxt = (i + 1) % k
            if kind is SegmentKind.LINE:
                w[row : row + m, i] = 1.0 - ts
                w[row : row + m, nxt] = ts
            else:
                u = 1.0 - ts
                base = self._handle_base[i]
                w[row : row + m, i] = u**3
                w[row : row + m, base] = 3.0 * u**2 * ts
                w[row : row + m, base + 1] = 3.0 * u * ts**2
                w[row : row + m, nxt] = ts**3
            row += m
        return w


def sample_path(path: ClosedPath, n: int) -> SamplePolyline:
    """n points uniform in parameter along the path, in traversal order.

    Each of the K segments receives floor(n/K) samples; the remainder goes
    to the earliest segments. Per-segment parameters are t = j/m (half-open),
    so junction points appear once.
    """
    k = len(path)
    if n < k:
        raise GeometryError(f"need at least one sample per segment ({n} < {k})")
    counts = split_counts(n, k)
    space = PathParamSpace.of(path)
    pts = space.sampling_matrix(counts) @ space.params(path)
    seg_idx = np.repeat(np.arange(k), counts)
    ts = np.concatenate([np.arange(m) / m for m in counts])
    return SamplePolyline(pts, seg_idx, ts, path)


def polygonize(path: ClosedPath, samples_per_segment: int = DEFAULT_POLY_SAMPLES) -> np.ndarray:
    """Dense (K*s, 2) polyline approximation, order-preserving, closed cyclically."""
    if samples_per_segment < 1:
        raise GeometryError("samples_per_segment must be >= 1")
    space = PathParamSpace.of(path)
    counts = [samples_per_segment] * len(path)
    return space.sampling_matrix(counts) @ space.params(path)


def reflect_point(p: Point, axis: SymmetryAxis) -> Point:
    x, y = reflect_points(np.array([[p.x, p.y]]), axis)[0]
    return Point(float(x), float(y))


def reflect_points(points: np.ndarray, axis: SymmetryAxis) -> np.ndarray:
    """Mirror an (n, 2) array of points across the axis."""
    o = np.array((axis.origin.x, axis.origin.y))
    r = axis.reflection_matrix()
    return (np.asarray(points, dtype=float) - o) @ r + o


def mirror_path(path: ClosedPath, axis: SymmetryAxis) -> ClosedPath:
    """Reflect every control point; segment and control order are preserved.

    Reflection reverses traversal orientation geometrically, so consumers
    that match mirrored samples against originals in order must reverse one
    side first.
    """
    segs = []
    for seg in path.segments:
        ctrl = tuple(reflect_point(p, axis) for p in seg.control)
        segs.append(CurveSegment(seg.kind, ctrl))
    return ClosedPath(tuple(segs))


def shoelace_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * y1 - x1 * y))


def path_centroid(path: ClosedPath, samples_per_segment: int = DEFAULT_POLY_SAMPLES) -> Point:
    """Area centroid of the polygonized path (not the control-point mean)."""
    poly = polygonize(path, samples_per_segment)
    x, y = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x, -1), np.roll(y, -1)
    cross = x * y1 - x1 * y
    area = 0.5 * float(np.sum(cross))
    if abs(area) <= 1e-9:
        raise GeometryError("degenerate path: polygonized area is ~0")
    cx = float(np.sum((x + x1) * cross)) / (6.0 * area)
    cy = float(np.sum((y + y1) * cross)) / (6.0 * area)
    return Point(cx, cy)


PointsLike = Union[SamplePolyline, np.ndarray, Sequence[Sequence[float]]]


def as_point_array(points: PointsLike) -> np.ndarray:
    if isinstance(points, SamplePolyline):
        return points.points
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"expected an (n, 2) point array, got shape {arr.shape}")
    return arr


def laplacian(points: PointsLike) -> np.ndarray:
    """Cyclic Laplacian coordinates p_i - (p_{i+1} + p_{i-1}) / 2, one per point."""
    pts = as_point_array(points)
    if len(pts) < 3:
        raise GeometryError("laplacian needs at least 3 points")
    return pts - 0.5 * (np.roll(pts, -1, axis=0) + np.roll(pts, 1, axis=0))


def _on_segment(px, py, qx, qy, rx, ry) -> bool:
    """Is r (collinear with p-q) within the segment's bounding box?"""
    return (
        min(px, qx) <= rx <= max(px, qx) and min(py, qy) <= ry <= max(py, qy)
    )


def segments_intersect_any(
    a0: np.ndarray,
    a1: np.ndarray,
    b0: np.ndarray,
    b1: np.ndarray,
    pair_i: np.ndarray,
    pair_j: np.ndarray,
    exempt_shared: bool = True,
) -> bool:
    """True if any indexed pair of segments (a0[i],a1[i]) x (b0[j],b1[j]) crosses.

    With ``exempt_shared`` (progressive generation, where consecutive curves
    legitimately meet at a junction), pairs sharing an endpoint exactly only
    count when they also overlap collinearly beyond the shared point.
    Without it, any touch between tested pairs counts.
    """
    p0, p1 = a0[pair_i], a1[pair_i]
    q0, q1 = b0[pair_j], b1[pair_j]

    def orient(a, b, c):
        return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (
            c[:, 0] - a[:, 0]
        )

    d1 = orient(p0, p1, q0)
    d2 = orient(p0, p1, q1)
    d3 = orient(q0, q1, p0)
    d4 = orient(q0, q1, p1)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)
    if proper.any():
        return True

    degenerate = ((d1 == 0) | (d2 == 0) | (d3 == 0) | (d4 == 0)) & (d1 * d2 <= 0) & (
        d3 * d4 <= 0
    )
    for idx in np.nonzero(degenerate)[0]:
        pa, pb, qa, qb = p0[idx], p1[idx], q0[idx], q1[idx]
        shared = 0
        for u in (pa, pb):
            for v in (qa, qb):
                if u[0] == v[0] and u[1] == v[1]:
                    shared += 1
        if shared and exempt_shared:
            # A junction touch is fine unless the segments also overlap
            # collinearly beyond the shared point.
            if d1[idx] == 0 and d2[idx] == 0 and d3[idx] == 0 and d4[idx] == 0:
                for r, (sa, sb) in (
                    (qa, (pa, pb)),
                    (qb, (pa, pb)),
                    (pa, (qa, qb)),
                    (pb, (qa, qb)),
                ):
                    if (
                        min(sa[0], sb[0]) < r[0] < max(sa[0], sb[0])
                        or min(sa[1], sb[1]) < r[1] < max(sa[1], sb[1])
                    ):
                        return True
            continue
        if shared:
            return True
        hit = False
        if d1[idx] == 0 and _on_segment(pa[0], pa[1], pb[0], pb[1], qa[0], qa[1]):
            hit = True
        elif d2[idx] == 0 and _on_segment(pa[0], pa[1], pb[0], pb[1], qb[0], qb[1]):
            hit = True
        elif d3[idx] == 0 and _on_segment(qa[0], qa[1], qb[0], qb[1], pa[0], pa[1]):
            hit = True
        elif d4[idx] == 0 and _on_segment(qa[0], qa[1], qb[0], qb[1], pb[0], pb[1]):
            hit = True
        if hit:
            return True
    return False


def polyline_self_intersects(poly: np.ndarray) -> bool:
    """Any pair of non-adjacent edges of the closed polyline crosses.

    Adjacency is cyclic-consecutive; other edge pairs touching at an exact
    shared vertex are genuine self-touches and count.
    """
    e = len(poly)
    if e < 4:
        return False
    a0 = poly
    a1 = np.roll(poly, -1, axis=0)
    ii, jj = np.triu_indices(e, k=2)
    keep = ~((ii == 0) & (jj == e - 1))
    return segments_intersect_any(
        a0, a1, a0, a1, ii[keep], jj[keep], exempt_shared=False
    )


def self_intersects(path: ClosedPath, poly_n: int = DEFAULT_POLY_SAMPLES) -> bool:
    """Self-intersection of the polygonization at poly_n samples per segment."""
    if poly_n < 8:
        raise GeometryError("poly_n must be >= 8 for a faithful proxy")
    return polyline_self_intersects(polygonize(path, poly_n))


def translate_path(path: ClosedPath, dx: float, dy: float) -> ClosedPath:
    segs = []
    for seg in path.segments:
        ctrl = tuple(Point(p.x + dx, p.y + dy) for p in seg.control)
        segs.append(CurveSegment(seg.kind, ctrl))
    return ClosedPath(tuple(segs))
