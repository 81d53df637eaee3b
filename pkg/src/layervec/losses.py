"""Point-set similarity losses between sampled paths and control-point sets.

All losses are squared-distance sums over equal-size point sequences:
cyclic-shift-minimized ordered matching, exact assignment (earth mover),
mirror symmetry terms, and Laplacian smoothness, plus the weighted
combination used by the fitters. Everything is pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import (
    ClosedPath,
    PointsLike,
    SamplePolyline,
    SegmentKind,
    SymmetryAxis,
    as_point_array,
    laplacian,
    mirror_path,
    reflect_points,
    sample_path,
)


class LossError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    """Weights for the symmetry and smoothness terms of the combined loss."""

    w_sym: float = 1.0
    w_smooth: float = 0.1

    def __post_init__(self) -> None:
        for name, v in (("w_sym", self.w_sym), ("w_smooth", self.w_smooth)):
            if not (math.isfinite(v) and v >= 0.0):
                raise LossError(f"{name}={v} must be finite and >= 0")


@dataclass(frozen=True, eq=False)
class ControlPointSet:
    """Control points flattened in traversal order, with per-point roles.

    Junction points appear once per segment that lists them (so shared
    endpoints occur twice), matching the per-segment point tuples.
    """

    points: np.ndarray
    roles: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.points) < 1:
            raise LossError("empty control point set")
        if len(self.points) != len(self.roles):
            raise LossError("one role per point required")
        self.points.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)


_LINE_ROLES = ("start", "end")
_CUBIC_ROLES = ("start", "control1", "control2", "end")


def control_points(path: ClosedPath) -> ControlPointSet:
    pts: list[tuple[float, float]] = []
    roles: list[str] = []
    for seg in path.segments:
        names = _LINE_ROLES if seg.kind is SegmentKind.LINE else _CUBIC_ROLES
        for p, role in zip(seg.control, names):
            pts.append((p.x, p.y))
            roles.append(role)
    return ControlPointSet(np.array(pts), tuple(roles))


def _pair_sq_dists(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    d = p[:, None, :] - t[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def _points_pair(p: PointsLike, t: PointsLike) -> tuple[np.ndarray, np.ndarray]:
    pa, ta = as_point_array(p), as_point_array(t)
    if len(pa) != len(ta):
        raise LossError(f"point sets differ in size ({len(pa)} vs {len(ta)})")
    if len(pa) < 1:
        raise LossError("empty point sets")
    return pa, ta


def _best_shift(d: np.ndarray) -> tuple[float, int]:
    """Minimum over cyclic shifts j of sum_i d[i, (j+i) % K]."""
    k = d.shape[0]
    i = np.arange(k)
    cols = (np.arange(k)[:, None] + i[None, :]) % k
    costs = d[i[None, :], cols].sum(axis=1)
    j = int(np.argmin(costs))
    return float(costs[j]), j


def match_loss(p: PointsLike, t: PointsLike) -> float:
    """Ordered matching cost: min over cyclic shifts of summed squared distances."""
    pa, ta = _points_pair(p, t)
    return _best_shift(_pair_sq_dists(pa, ta))[0]


def ordered_chamfer(p: PointsLike, t: PointsLike) -> float:
    """Bidirectional ordered matching cost; symmetric in its arguments."""
    pa, ta = _points_pair(p, t)
    d = _pair_sq_dists(pa, ta)
    return _best_shift(d)[0] + _best_shift(d.T)[0]


def emd(p: PointsLike, t: PointsLike) -> float:
    """Exact minimum total squared distance over bijections (assignment solve)."""
    pa, ta = _points_pair(p, t)
    d = _pair_sq_dists(pa, ta)
    rows, cols = linear_sum_assignment(d)
    return float(d[rows, cols].sum())


def smoothness_loss(p: PointsLike, t: PointsLike) -> float:
    """Summed squared differences of cyclic Laplacian coordinates.

    The squared-norm form is used so that opposing per-point deviations
    cannot cancel; it is zero iff both polylines share all local offsets,
    in particular under any common translation.
    """
    pa, ta = _points_pair(p, t)
    if len(pa) < 3:
        raise LossError("smoothness needs at least 3 points")
    diff = laplacian(pa) - laplacian(ta)
    return float(np.sum(diff * diff))


def sample_symmetry_loss(
    path: ClosedPath, axis: SymmetryAxis, target: PointsLike, n: int
) -> float:
    """Mirror the path, sample it, and score against the target samples.

    Mirroring reverses traversal orientation, so the mirrored polyline is
    index-reversed before the ordered matching; the assignment term does not
    depend on order.
    """
    ta = as_point_array(target)
    if len(ta) != n:
        raise LossError(f"target has {len(ta)} points, expected n={n}")
    mirrored = sample_path(mirror_path(path, axis), n).points
    return ordered_chamfer(mirrored[::-1], ta) + emd(mirrored, ta)


def control_symmetry_loss(q: ControlPointSet, axis: SymmetryAxis) -> float:
    """Ordered matching between mirrored and original control sequences.

    Minimized over cyclic shifts and over index reversal of the mirrored
    sequence (reflection reverses traversal order).
    """
    qa = q.points if isinstance(q, ControlPointSet) else as_point_array(q)
    qm = reflect_points(qa, axis)
    return min(ordered_chamfer(qm, qa), ordered_chamfer(qm[::-1], qa))


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    chamfer: float
    mover: float
    sym: float
    csym: float
    smooth: float

    def as_dict(self) -> dict[str, float]:
        return {
            "total": self.total,
            "chamfer": self.chamfer,
            "mover": self.mover,
            "sym": self.sym,
            "csym": self.csym,
            "smooth": self.smooth,
        }


def geometric_loss(
    pred: ClosedPath,
    target: ClosedPath,
    axis: SymmetryAxis | None,
    w: LossWeights,
    n: int,
) -> LossBreakdown:
    """Weighted combination of all geometric terms, with the per-term breakdown.

    total = (chamfer + mover) + w_sym * (sym + csym) + w_smooth * smooth.
    Symmetry terms are reported as 0 when no axis is given.
    """
    ps = sample_path(pred, n).points
    ts = sample_path(target, n).points
    chm = ordered_chamfer(ps, ts)
    mover = emd(ps, ts)
    smooth = smoothness_loss(ps, ts)
    if axis is not None:
        sym = sample_symmetry_loss(pred, axis, ts, n)
        csym = control_symmetry_loss(control_points(pred), axis)
    else:
        sym = 0.0
        csym = 0.0
    total = (chm + mover) + w.w_sym * (sym + csym) + w.w_smooth * smooth
    return LossBreakdown(total, chm, mover, sym, csym, smooth)
