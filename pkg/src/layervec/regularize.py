"""Post-fit shape regularization: axis alignment, circle replacement,
concentric snapping, and parallel snapping, applied in that order.

Rules rewrite paths through their junction-shared parameter space, so
closure is preserved exactly. Every rule is a no-op on inputs that already
satisfy it (guarded against floating-point churn), which makes the full
pipeline idempotent: regularizing twice returns bit-identical control
points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .document import ClipartDocument, Layer
from .geometry import (
    ClosedPath,
    PathParamSpace,
    Point,
    SegmentKind,
    cubic,
    split_counts,
)

CIRCLE_KAPPA = 0.5522847498

# Translations and rotations smaller than this are floating-point churn, not
# regularity violations; skipping them keeps the pipeline exactly idempotent.
_NOOP_EPS = 1e-9
_ANGLE_NOOP_EPS = 1e-12


@dataclass(frozen=True)
class RegularizeConfig:
    angle_tol: float = 10.0  # degrees
    arc_dist_tol: float = 0.5  # canvas units
    concentric_frac: float = 0.1  # fraction of the longest bbox side
    arc_samples: int = 64

    def __post_init__(self) -> None:
        for name, v in (
            ("angle_tol", self.angle_tol),
            ("arc_dist_tol", self.arc_dist_tol),
            ("concentric_frac", self.concentric_frac),
            ("arc_samples", self.arc_samples),
        ):
            if not v > 0:
                raise ValueError(f"{name}={v} must be positive")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)

    def groups(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return out


def _line_angle(theta: np.ndarray, a: int, b: int) -> float | None:
    """Direction of the line between junctions a and b, in [0, pi)."""
    dx = theta[b, 0] - theta[a, 0]
    dy = theta[b, 1] - theta[a, 1]
    if dx == 0.0 and dy == 0.0:
        return None
    ang = math.atan2(dy, dx)
    if ang < 0:
        ang += math.pi
    if ang >= math.pi:
        ang -= math.pi
    return ang


def _angle_dist(a: float, b: float) -> float:
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def snap_axis_aligned(doc: ClipartDocument, cfg: RegularizeConfig) -> ClipartDocument:
    """Level near-horizontal and near-vertical line segments exactly.

    Junctions connected by near-horizontal lines share one y (their mean);
    near-vertical lines share one x. Because a snap moves junctions shared
    with neighboring lines, the rule runs to its fixed point: aligned lines
    stay aligned and each round aligns at least one more, so it terminates.
    Leveling moves each endpoint by at most len * sin(angle_tol) / 2 per
    round.
    """
    tol = math.radians(cfg.angle_tol)
    layers = []
    for layer in doc.layers:
        path = layer.path
        space = PathParamSpace.of(path)
        theta = space.params(path)
        k = space.n_segments
        line_ids = [i for i, kd in enumerate(space.kinds) if kd is SegmentKind.LINE]
        touched = False
        for _ in range(len(line_ids) + 1):
            h_uf, v_uf = _UnionFind(k), _UnionFind(k)
            for i in line_ids:
                j = (i + 1) % k
                ang = _line_angle(theta, i, j)
                if ang is None:
                    continue
                if _angle_dist(ang, 0.0) < tol:
                    h_uf.union(i, j)
                elif _angle_dist(ang, math.pi / 2) < tol:
                    v_uf.union(i, j)
            changed = False
            for uf, coord in ((h_uf, 1), (v_uf, 0)):
                for members in uf.groups().values():
                    if len(members) < 2:
                        continue
                    vals = theta[members, coord]
                    if vals.max() > vals.min():
                        theta[members, coord] = vals.mean()
                        changed = True
            if not changed:
                break
            touched = True
        if touched:
            layers.append(replace(layer, path=space.path(theta)))
        else:
            layers.append(layer)
    return replace(doc, layers=tuple(layers))


def circle_path(cx: float, cy: float, r: float) -> ClosedPath:
    """Canonical four-cubic circle approximation."""
    if not r > 0:
        raise ValueError(f"radius {r} must be positive")
    k = CIRCLE_KAPPA * r
    e = Point(cx + r, cy)
    s = Point(cx, cy + r)
    w = Point(cx - r, cy)
    n = Point(cx, cy - r)
    return ClosedPath(
        (
            cubic(e, Point(cx + r, cy + k), Point(cx + k, cy + r), s),
            cubic(s, Point(cx - k, cy + r), Point(cx - r, cy + k), w),
            cubic(w, Point(cx - r, cy - k), Point(cx - k, cy - r), n),
            cubic(n, Point(cx + k, cy - r), Point(cx + r, cy - k), e),
        )
    )


def canonical_circle_params(path: ClosedPath) -> tuple[float, float, float] | None:
    """(cx, cy, r) when the path is (within float noise) a canonical circle."""
    if len(path) != 4 or any(s.kind is not SegmentKind.CUBIC for s in path.segments):
        return None
    j = path.junctions()
    cx = (j[0].x + j[2].x) / 2.0
    cy = (j[1].y + j[3].y) / 2.0
    r = (j[0].x - j[2].x) / 2.0
    if not r > 0:
        return None
    ref = circle_path(cx, cy, r)
    tol = 1e-9 * max(1.0, r)
    for sa, sb in zip(path.segments, ref.segments):
        for pa, pb in zip(sa.control, sb.control):
            if abs(pa.x - pb.x) > tol or abs(pa.y - pb.y) > tol:
                return None
    return cx, cy, r


def _fit_circle(points: np.ndarray) -> tuple[float, float, float] | None:
    """Algebraic least-squares circle, refined by one Gauss-Newton step."""
    x, y = points[:, 0], points[:, 1]
    a = np.column_stack([2.0 * x, 2.0 * y, np.ones_like(x)])
    b = x * x + y * y
    try:
        sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    except np.linalg.LinAlgError:
        return None
    cx, cy, c = sol
    rr = c + cx * cx + cy * cy
    if rr <= 0:
        return None
    r = math.sqrt(rr)
    # One Gauss-Newton step on the geometric residuals d_i - r.
    dx, dy = x - cx, y - cy
    d = np.hypot(dx, dy)
    if d.min() < 1e-12:
        return cx, cy, r
    f = d - r
    jac = np.column_stack([-dx / d, -dy / d, -np.ones_like(d)])
    try:
        step, *_ = np.linalg.lstsq(jac, -f, rcond=None)
    except np.linalg.LinAlgError:
        return cx, cy, r
    cx2, cy2, r2 = cx + step[0], cy + step[1], r + step[2]
    if r2 > 0:
        return float(cx2), float(cy2), float(r2)
    return float(cx), float(cy), float(r)


def _arc_samples(path: ClosedPath, n: int) -> np.ndarray:
    k = len(path)
    counts = split_counts(max(n, k), k)
    space = PathParamSpace.of(path)
    return space.sampling_matrix(counts) @ space.params(path)


def fit_arc_like(doc: ClipartDocument, cfg: RegularizeConfig) -> ClipartDocument:
    """Replace nearly circular paths with the canonical circle.

    Detection samples the path and checks the mean |distance - radius| of
    the best-fit circle against arc_dist_tol. Paths that already are
    canonical circles are left untouched.
    """
    layers = []
    for layer in doc.layers:
        if canonical_circle_params(layer.path) is not None:
            layers.append(layer)
            continue
        pts = _arc_samples(layer.path, cfg.arc_samples)
        fit = _fit_circle(pts)
        if fit is None:
            layers.append(layer)
            continue
        cx, cy, r = fit
        dev = np.abs(np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) - r)
        if float(dev.mean()) < cfg.arc_dist_tol:
            layers.append(replace(layer, path=circle_path(cx, cy, r)))
        else:
            layers.append(layer)
    return replace(doc, layers=tuple(layers))


def enforce_concentric(doc: ClipartDocument, cfg: RegularizeConfig) -> ClipartDocument:
    """Translate clusters of near-concentric circles onto their mean center.

    Two circles cluster (single linkage) when their centers are closer than
    concentric_frac times the longest bounding-box side of either. Each
    member moves by at most the cluster diameter.
    """
    circles: list[tuple[int, float, float, float]] = []
    for idx, layer in enumerate(doc.layers):
        params = canonical_circle_params(layer.path)
        if params is not None:
            circles.append((idx, *params))
    if len(circles) < 2:
        return doc
    uf = _UnionFind(len(circles))
    for i in range(len(circles)):
        for j in range(i + 1, len(circles)):
            _, xi, yi, ri = circles[i]
            _, xj, yj, rj = circles[j]
            limit = cfg.concentric_frac * max(2.0 * ri, 2.0 * rj)
            if math.hypot(xi - xj, yi - yj) < limit:
                uf.union(i, j)
    moves: dict[int, tuple[float, float]] = {}
    for members in uf.groups().values():
        if len(members) < 2:
            continue
        centers = np.array([[circles[m][1], circles[m][2]] for m in members])
        mean = centers.mean(axis=0)
        for m in members:
            dx = float(mean[0] - circles[m][1])
            dy = float(mean[1] - circles[m][2])
            if math.hypot(dx, dy) > _NOOP_EPS:
                moves[circles[m][0]] = (dx, dy)
    if not moves:
        return doc
    layers = list(doc.layers)
    for idx, (dx, dy) in moves.items():
        layer = layers[idx]
        space = PathParamSpace.of(layer.path)
        theta = space.params(layer.path)
        theta[:, 0] += dx
        theta[:, 1] += dy
        layers[idx] = replace(layer, path=space.path(theta))
    return replace(doc, layers=tuple(layers))


def _weighted_circular_mean(angles: np.ndarray, weights: np.ndarray) -> float:
    s = float(np.sum(weights * np.sin(2.0 * angles)))
    c = float(np.sum(weights * np.cos(2.0 * angles)))
    mean = 0.5 * math.atan2(s, c)
    if mean < 0:
        mean += math.pi
    if mean >= math.pi:
        mean -= math.pi
    return mean


def enforce_parallel(doc: ClipartDocument, cfg: RegularizeConfig) -> ClipartDocument:
    """Rotate clusters of nearly parallel lines to a common direction.

    Lines cluster across all paths by single linkage on direction distance
    (mod 180 degrees). Exactly axis-aligned lines anchor their cluster: the
    cluster snaps to the longest anchor's axis and anchors never move. Each
    junction may be moved by at most one rotation; lines whose junctions are
    already claimed (by an anchor or an earlier cluster member) are left in
    place, and cluster means are taken over the lines that can actually
    move. Rotation about the midpoint displaces endpoints by
    len * sin(delta/2) for a direction change delta.
    """
    tol = math.radians(cfg.angle_tol)

    @dataclass
    class _LineRef:
        layer: int
        seg: int
        j_a: int
        j_b: int
        angle: float
        length: float
        anchor: bool

    spaces: list[PathParamSpace] = []
    thetas: list[np.ndarray] = []
    lines: list[_LineRef] = []
    for li, layer in enumerate(doc.layers):
        space = PathParamSpace.of(layer.path)
        theta = space.params(layer.path)
        spaces.append(space)
        thetas.append(theta)
        k = space.n_segments
        for si, kind in enumerate(space.kinds):
            if kind is not SegmentKind.LINE:
                continue
            j = (si + 1) % k
            ang = _line_angle(theta, si, j)
            if ang is None:
                continue
            length = float(
                math.hypot(
                    theta[j, 0] - theta[si, 0], theta[j, 1] - theta[si, 1]
                )
            )
            anchor = (
                theta[si, 1] == theta[j, 1] or theta[si, 0] == theta[j, 0]
            )
            lines.append(_LineRef(li, si, si, j, ang, length, anchor))
    if len(lines) < 2:
        return doc

    uf = _UnionFind(len(lines))
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            if _angle_dist(lines[i].angle, lines[j].angle) < tol:
                uf.union(i, j)

    claimed: set[tuple[int, int]] = set()
    for ln in lines:
        if ln.anchor:
            claimed.add((ln.layer, ln.j_a))
            claimed.add((ln.layer, ln.j_b))

    touched = set()
    clusters = sorted(uf.groups().values(), key=lambda ms: min(ms))
    for members in clusters:
        if len(members) < 2:
            continue
        members = sorted(members)
        anchors = [lines[m] for m in members if lines[m].anchor]
        movable = []
        for m in members:
            ln = lines[m]
            if ln.anchor:
                continue
            ja, jb = (ln.layer, ln.j_a), (ln.layer, ln.j_b)
            if ja in claimed or jb in claimed:
                continue
            claimed.add(ja)
            claimed.add(jb)
            movable.append(ln)
        if not movable:
            continue
        if anchors:
            best = max(anchors, key=lambda ln: ln.length)
            target = 0.0 if best.angle == 0.0 else math.pi / 2
        else:
            angles = np.array([ln.angle for ln in movable])
            weights = np.array([ln.length for ln in movable])
            target = _weighted_circular_mean(angles, weights)
        ux, uy = math.cos(target), math.sin(target)
        for ln in movable:
            if _angle_dist(ln.angle, target) < _ANGLE_NOOP_EPS:
                continue
            theta = thetas[ln.layer]
            ax, ay = theta[ln.j_a]
            bx, by = theta[ln.j_b]
            mx, my = (ax + bx) / 2.0, (ay + by) / 2.0
            half = ln.length / 2.0
            s = 1.0 if (bx - ax) * ux + (by - ay) * uy >= 0 else -1.0
            theta[ln.j_a] = (mx - s * half * ux, my - s * half * uy)
            theta[ln.j_b] = (mx + s * half * ux, my + s * half * uy)
            touched.add(ln.layer)

    if not touched:
        return doc
    layers = list(doc.layers)
    for li in touched:
        layers[li] = replace(layers[li], path=spaces[li].path(thetas[li]))
    return replace(doc, layers=tuple(layers))


def regularize(doc: ClipartDocument, cfg: RegularizeConfig | None = None) -> ClipartDocument:
    """All four rules in order: axis-align, circles, concentric, parallel.

    A late rule can expose new regularity to an earlier one (a rotated line
    may become axis-alignable, a tweaked path circle-like), so the pipeline
    repeats until the document stops changing. Progress is monotone (aligned
    lines, circle replacements, and anchors only accumulate); the cap is a
    safety net.
    """
    cfg = cfg or RegularizeConfig()
    for _ in range(8):
        out = snap_axis_aligned(doc, cfg)
        out = fit_arc_like(out, cfg)
        out = enforce_concentric(out, cfg)
        out = enforce_parallel(out, cfg)
        if out == doc:
            return out
        doc = out
    return doc
