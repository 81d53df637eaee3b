import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layervec.geometry import (
    ClosedPath,
    GeometryError,
    PathParamSpace,
    Point,
    SymmetryAxis,
    cubic,
    eval_curve,
    laplacian,
    line,
    mirror_path,
    path_centroid,
    polygon_path,
    polygonize,
    reflect_point,
    sample_path,
    self_intersects,
    split_counts,
)


def decasteljau(ctrl, t):
    """Independent cubic evaluation by repeated linear interpolation."""
    pts = [np.array(p, dtype=float) for p in ctrl]
    while len(pts) > 1:
        pts = [(1 - t) * a + t * b for a, b in zip(pts, pts[1:])]
    return pts[0]


UNIT_SQUARE = polygon_path(
    [Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)]
)


class TestEvalCurve:
    def test_line_endpoints(self):
        seg = line(Point(0, 0), Point(2, 0))
        assert eval_curve(seg, 0) == Point(0, 0)
        assert eval_curve(seg, 1) == Point(2, 0)

    def test_cubic_endpoints(self):
        seg = cubic(Point(0, 0), Point(0, 1), Point(1, 1), Point(1, 0))
        assert eval_curve(seg, 1) == Point(1, 0)
        assert eval_curve(seg, 0) == Point(0, 0)

    def test_cubic_midpoint_matches_decasteljau(self):
        seg = cubic(Point(0, 0), Point(0, 1), Point(1, 1), Point(1, 0))
        p = eval_curve(seg, 0.5)
        assert (p.x, p.y) == pytest.approx((0.5, 0.75), abs=1e-15)
        ref = decasteljau([(0, 0), (0, 1), (1, 1), (1, 0)], 0.5)
        assert (p.x, p.y) == pytest.approx(tuple(ref), abs=1e-15)

    @given(st.floats(0, 1), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_cubic_matches_decasteljau_everywhere(self, t, seed):
        rng = np.random.default_rng(seed)
        ctrl = rng.uniform(-5, 5, size=(4, 2))
        seg = cubic(*(Point(*p) for p in ctrl))
        p = eval_curve(seg, t)
        ref = decasteljau(ctrl, t)
        assert math.hypot(p.x - ref[0], p.y - ref[1]) < 1e-9

    def test_out_of_range_t(self):
        seg = line(Point(0, 0), Point(1, 0))
        with pytest.raises(GeometryError):
            eval_curve(seg, -0.1)
        with pytest.raises(GeometryError):
            eval_curve(seg, 1.1)


class TestClosedPath:
    def test_closure_exact_after_construction(self):
        path = UNIT_SQUARE
        for k, seg in enumerate(path.segments):
            nxt = path.segments[(k + 1) % len(path)]
            assert seg.end == nxt.start  # zero tolerance

    def test_snapping_within_tolerance(self):
        segs = (
            line(Point(0, 0), Point(1, 0)),
            line(Point(1, 5e-7), Point(1, 1)),
            line(Point(1, 1), Point(0, 0)),
        )
        path = ClosedPath(segs)
        assert path.segments[0].end == path.segments[1].start

    def test_large_gap_rejected(self):
        segs = (
            line(Point(0, 0), Point(1, 0)),
            line(Point(1, 0.5), Point(0, 0)),
        )
        with pytest.raises(GeometryError):
            ClosedPath(segs)

    def test_empty_rejected(self):
        with pytest.raises(GeometryError):
            ClosedPath(())

    def test_control_count_invariants(self):
        with pytest.raises(GeometryError):
            from layervec.geometry import CurveSegment, SegmentKind

            CurveSegment(SegmentKind.LINE, (Point(0, 0), Point(1, 1), Point(2, 2)))

    def test_nonfinite_point_rejected(self):
        with pytest.raises(GeometryError):
            Point(float("nan"), 0.0)


class TestSamplePath:
    def test_square_four_samples_are_corners(self):
        sq = polygon_path([Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)])
        s = sample_path(sq, 4)
        assert np.allclose(s.points, [[0, 0], [1, 0], [1, 1], [0, 1]])

    def test_square_eight_samples_include_midpoints(self):
        sq = polygon_path([Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)])
        s = sample_path(sq, 8)
        expected = [
            [0, 0], [0.5, 0], [1, 0], [1, 0.5],
            [1, 1], [0.5, 1], [0, 1], [0, 0.5],
        ]
        assert np.allclose(s.points, expected)

    def test_remainder_distribution(self):
        assert split_counts(200, 3) == [67, 67, 66]
        tri = polygon_path([Point(0, 0), Point(10, 0), Point(0, 10)])
        s = sample_path(tri, 200)
        assert len(s) == 200
        counts = np.bincount(s.segment_index)
        assert counts.tolist() == [67, 67, 66]

    def test_too_few_samples_rejected(self):
        with pytest.raises(GeometryError):
            sample_path(UNIT_SQUARE, 3)

    @given(st.integers(4, 211))
    @settings(max_examples=30, deadline=None)
    def test_exactly_n_points_counts_differ_by_at_most_one(self, n):
        s = sample_path(UNIT_SQUARE, n)
        assert len(s) == n
        counts = np.bincount(s.segment_index, minlength=4)
        assert counts.max() - counts.min() <= 1

    def test_provenance_half_open(self):
        s = sample_path(UNIT_SQUARE, 8)
        assert s.parameter.max() < 1.0
        assert s.parameter.min() == 0.0


class TestMirror:
    def test_vertical_axis_reflection(self):
        axis = SymmetryAxis(Point(0, 0), (0, 1))
        p = reflect_point(Point(1, 2), axis)
        assert (p.x, p.y) == pytest.approx((-1, 2), abs=1e-12)

    def test_diagonal_axis_swaps_coordinates(self):
        axis = SymmetryAxis(Point(0, 0), (math.sqrt(0.5), math.sqrt(0.5)))
        p = reflect_point(Point(3, 0), axis)
        assert (p.x, p.y) == pytest.approx((0, 3), abs=1e-12)

    def test_symmetric_path_has_same_control_multiset(self):
        axis = SymmetryAxis(Point(0.5, 0), (0, 1))
        mirrored = mirror_path(UNIT_SQUARE, axis)
        orig = sorted(
            (round(p.x, 9), round(p.y, 9))
            for seg in UNIT_SQUARE.segments
            for p in seg.control
        )
        refl = sorted(
            (round(p.x, 9), round(p.y, 9))
            for seg in mirrored.segments
            for p in seg.control
        )
        assert orig == refl

    def test_structure_preserved(self):
        axis = SymmetryAxis(Point(0, 0), (1, 0))
        mirrored = mirror_path(UNIT_SQUARE, axis)
        assert mirrored.kinds() == UNIT_SQUARE.kinds()

    @given(
        st.integers(0, 2**32 - 1),
        st.floats(0, math.pi - 1e-9),
        st.floats(-3, 3),
        st.floats(-3, 3),
    )
    @settings(max_examples=40, deadline=None)
    def test_mirror_is_an_involution(self, seed, angle, ox, oy):
        rng = np.random.default_rng(seed)
        pts = [Point(*p) for p in rng.uniform(0, 10, size=(3, 2))]
        path = polygon_path(pts)
        axis = SymmetryAxis.from_angle(Point(ox, oy), angle)
        twice = mirror_path(mirror_path(path, axis), axis)
        for a, b in zip(path.segments, twice.segments):
            for pa, pb in zip(a.control, b.control):
                assert math.hypot(pa.x - pb.x, pa.y - pb.y) < 1e-9

    def test_axis_direction_normalized(self):
        axis = SymmetryAxis(Point(0, 0), (3, 4))
        assert math.hypot(*axis.direction) == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(GeometryError):
            SymmetryAxis(Point(0, 0), (0, 0))


def shoelace_centroid_oracle(vertices):
    """Textbook polygon area centroid, written independently."""
    a = 0.0
    cx = 0.0
    cy = 0.0
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        cross = x0 * y1 - x1 * y0
        a += cross
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
    a *= 0.5
    return cx / (6 * a), cy / (6 * a)


class TestCentroid:
    def test_unit_square(self):
        c = path_centroid(UNIT_SQUARE)
        assert (c.x, c.y) == pytest.approx((0.5, 0.5), abs=1e-12)

    def test_l_shape_matches_oracle(self):
        verts = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]
        path = polygon_path([Point(*v) for v in verts])
        c = path_centroid(path)
        ox, oy = shoelace_centroid_oracle(verts)
        assert (ox, oy) == pytest.approx((5 / 6, 5 / 6), abs=1e-12)
        assert (c.x, c.y) == pytest.approx((ox, oy), abs=1e-12)

    def test_circle_of_cubics(self):
        from layervec.regularize import circle_path

        c = path_centroid(circle_path(3, 4, 2))
        assert (c.x, c.y) == pytest.approx((3, 4), abs=1e-3)

    @given(st.floats(-50, 50), st.floats(-50, 50))
    @settings(max_examples=30, deadline=None)
    def test_translation_equivariance(self, dx, dy):
        verts = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]
        path = polygon_path([Point(*v) for v in verts])
        moved = polygon_path([Point(x + dx, y + dy) for x, y in verts])
        c0 = path_centroid(path)
        c1 = path_centroid(moved)
        assert (c1.x - c0.x, c1.y - c0.y) == pytest.approx((dx, dy), abs=1e-9)

    def test_degenerate_rejected(self):
        flat = ClosedPath(
            (
                line(Point(0, 0), Point(1, 0)),
                line(Point(1, 0), Point(2, 0)),
                line(Point(2, 0), Point(0, 0)),
            )
        )
        with pytest.raises(GeometryError):
            path_centroid(flat)


class TestLaplacian:
    def test_direct_formula(self):
        pts = np.array([[0, 0], [1, 0], [1, 1]], dtype=float)
        lap = laplacian(pts)
        assert lap[1] == pytest.approx([0.5, -0.5], abs=1e-15)

    def test_collinear_equidistant_interior_is_zero(self):
        pts = np.array([[0, 0], [1, 0], [2, 0], [1, 3]], dtype=float)
        lap = laplacian(pts)
        assert np.allclose(lap[1], [0, 0])

    @given(st.integers(0, 2**32 - 1), st.floats(-10, 10), st.floats(-10, 10))
    @settings(max_examples=40, deadline=None)
    def test_translation_invariance_and_zero_cycle_sum(self, seed, a, b):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-5, 5, size=(rng.integers(3, 12), 2))
        lap = laplacian(pts)
        assert np.allclose(lap.sum(axis=0), [0, 0], atol=1e-9)
        assert np.allclose(laplacian(pts + np.array([a, b])), lap, atol=1e-9)

    def test_too_few_points(self):
        with pytest.raises(GeometryError):
            laplacian(np.array([[0, 0], [1, 1]], dtype=float))

    def test_accepts_sample_polyline(self):
        s = sample_path(UNIT_SQUARE, 8)
        assert laplacian(s).shape == (8, 2)


class TestSelfIntersection:
    def test_convex_square(self):
        assert not self_intersects(UNIT_SQUARE, 16)

    def test_bowtie(self):
        bow = polygon_path([Point(0, 0), Point(1, 1), Point(1, 0), Point(0, 1)])
        assert self_intersects(bow, 16)

    def test_figure_eight_cubics(self):
        path = ClosedPath(
            (
                cubic(Point(0, 0), Point(2, 0), Point(-1, 1), Point(1, 1)),
                cubic(Point(1, 1), Point(-1, 0.5), Point(2, 0.5), Point(0, 0)),
            )
        )
        # dense polyline oracle: all edge pairs, quadratic scan
        poly = polygonize(path, 64)
        edges = [(poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly))]

        def seg_cross(p, q):
            (x1, y1), (x2, y2) = p
            (x3, y3), (x4, y4) = q
            d = (x2 - x1) * (y4 - y3) - (y2 - y1) * (x4 - x3)
            if d == 0:
                return False
            t = ((x3 - x1) * (y4 - y3) - (y3 - y1) * (x4 - x3)) / d
            u = ((x3 - x1) * (y2 - y1) - (y3 - y1) * (x2 - x1)) / d
            return 0 < t < 1 and 0 < u < 1

        oracle = any(
            seg_cross(edges[i], edges[j])
            for i in range(len(edges))
            for j in range(i + 2, len(edges))
            if not (i == 0 and j == len(edges) - 1)
        )
        assert oracle
        assert self_intersects(path, 16)

    def test_agrees_with_shapely_on_random_paths(self):
        from shapely.geometry import LineString

        from layervec.pathgen import GenConfig, random_closed_path

        rng = np.random.default_rng(77)
        cfg = GenConfig(curve_count_range=(3, 6), symmetric_prob=0.3, canvas=(64, 64), seed=77)
        for _ in range(100):
            path, _ = random_closed_path(cfg, rng)
            poly = polygonize(path, 16)
            ring = LineString(np.vstack([poly, poly[:1]]))
            assert self_intersects(path, 16) == (not ring.is_simple)

    def test_poly_n_validation(self):
        with pytest.raises(GeometryError):
            self_intersects(UNIT_SQUARE, 4)


class TestPolygonize:
    def test_square_one_per_side(self):
        poly = polygonize(UNIT_SQUARE, 1)
        assert np.allclose(poly, [[0, 0], [1, 0], [1, 1], [0, 1]])

    def test_cubic_midpoint_in_samples(self):
        seg = cubic(Point(0, 0), Point(0, 1), Point(1, 1), Point(1, 0))
        back = line(Point(1, 0), Point(0, 0))
        path = ClosedPath((seg, back))
        poly = polygonize(path, 2)
        assert np.allclose(poly[1], [0.5, 0.75])

    def test_order_preserving(self):
        poly = polygonize(UNIT_SQUARE, 4)
        s = sample_path(UNIT_SQUARE, 16)
        assert np.allclose(poly, s.points)


class TestParamSpace:
    def test_roundtrip(self):
        path = ClosedPath(
            (
                cubic(Point(0, 0), Point(0, 1), Point(1, 1), Point(1, 0)),
                line(Point(1, 0), Point(0, 0)),
            )
        )
        space = PathParamSpace.of(path)
        assert space.n_points == 2 + 2
        rebuilt = space.path(space.params(path))
        assert rebuilt == path

    def test_sampling_matrix_matches_sample_path(self):
        path = UNIT_SQUARE
        space = PathParamSpace.of(path)
        w = space.sampling_matrix([3, 3, 3, 3])
        pts = w @ space.params(path)
        assert np.allclose(pts, sample_path(path, 12).points)
