import math

import numpy as np
import pytest

from layervec.document import ClipartDocument, FillColor, Layer
from layervec.geometry import PathParamSpace, Point, cubic, polygon_path
from layervec.raster import (
    MaskImage,
    RasterImage,
    RasterError,
    SoftRenderParams,
    composite,
    image_difference,
    quantize8,
    rasterize_mask,
    read_image,
    render_document,
    render_loss,
    render_loss_grad,
    soft_mask,
    soft_render_loss,
    write_png,
    write_ppm,
)
from layervec.regularize import circle_path


def square(x0, y0, x1, y1):
    return polygon_path([Point(x0, y0), Point(x1, y0), Point(x1, y1), Point(x0, y1)])


def random_blob(rng, lo=10, hi=54):
    pts = [Point(*p) for p in rng.uniform(lo, hi, size=(4, 2))]
    segs = []
    for i in range(4):
        a, b = pts[i], pts[(i + 1) % 4]
        c1 = Point(
            a.x + (b.x - a.x) / 3 + rng.normal(0, 2),
            a.y + (b.y - a.y) / 3 + rng.normal(0, 2),
        )
        c2 = Point(
            a.x + 2 * (b.x - a.x) / 3 + rng.normal(0, 2),
            a.y + 2 * (b.y - a.y) / 3 + rng.normal(0, 2),
        )
        segs.append(cubic(a, c1, c2, b))
    from layervec.geometry import ClosedPath

    return ClosedPath(tuple(segs))


class TestRasterizeMask:
    def test_left_half_square(self):
        mask = rasterize_mask(square(0, 0, 4, 8), 8, 8, 4)
        assert mask.data[:, :4].sum() == 32.0
        assert mask.data[:, 4:].sum() == 0.0

    def test_path_outside_canvas(self):
        mask = rasterize_mask(square(100, 100, 110, 110), 8, 8, 4)
        assert mask.data.sum() == 0.0

    def test_disc_area_ratio(self):
        r = 20.0
        mask = rasterize_mask(circle_path(32, 32, r), 64, 64, 4)
        ratio = mask.data.sum() / (math.pi * r * r)
        assert 0.99 <= ratio <= 1.01

    def test_interior_exact_one_exterior_exact_zero(self):
        mask = rasterize_mask(square(2.3, 2.3, 6.1, 6.1), 8, 8, 4)
        assert mask.data[4, 4] == 1.0
        assert mask.data[0, 0] == 0.0
        band = (mask.data > 0) & (mask.data < 1)
        assert band.any()

    def test_degenerate_path_all_zero(self):
        from layervec.geometry import ClosedPath, line

        flat = ClosedPath(
            (
                line(Point(1, 1), Point(5, 1)),
                line(Point(5, 1), Point(3, 1)),
                line(Point(3, 1), Point(1, 1)),
            )
        )
        assert rasterize_mask(flat, 8, 8, 4).data.sum() == 0.0


class TestComposite:
    def test_zero_mask_returns_prev(self):
        prev = RasterImage(np.random.default_rng(0).random((4, 4, 3)))
        mask = MaskImage(np.zeros((4, 4)))
        out = composite(prev, mask, FillColor(1, 0, 0))
        assert np.array_equal(out.data, prev.data)

    def test_full_mask_returns_color(self):
        prev = RasterImage(np.random.default_rng(1).random((4, 4, 3)))
        mask = MaskImage(np.ones((4, 4)))
        out = composite(prev, mask, FillColor(0.25, 0.5, 0.75))
        assert np.allclose(out.data, [0.25, 0.5, 0.75])

    def test_half_mask_blend_value(self):
        prev = RasterImage(np.full((1, 1, 1), 0.2))
        mask = MaskImage(np.full((1, 1), 0.5))
        out = composite(prev, mask, 1.0)
        assert out.data[0, 0, 0] == pytest.approx(0.6, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(RasterError):
            composite(
                RasterImage(np.zeros((4, 4, 3))),
                MaskImage(np.zeros((5, 4))),
                FillColor(0, 0, 0),
            )

    def test_bit_exact_vs_naive_loops(self):
        rng = np.random.default_rng(7)
        prev = RasterImage(rng.random((6, 5, 3)))
        mask = MaskImage(rng.random((6, 5)))
        color = FillColor(*rng.random(3))
        out = composite(prev, mask, color)
        col = [color.r, color.g, color.b]
        for y in range(6):
            for x in range(5):
                m = mask.data[y, x]
                for c in range(3):
                    ref = prev.data[y, x, c] * (1.0 - m) + col[c] * m
                    assert out.data[y, x, c] == ref  # bit exact

    def test_range_preserved(self):
        rng = np.random.default_rng(8)
        prev = RasterImage(rng.random((8, 8, 3)))
        mask = MaskImage(rng.random((8, 8)))
        out = composite(prev, mask, FillColor(1, 1, 1))
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0


class TestRenderDocument:
    def test_empty_doc_all_white(self):
        img = render_document(ClipartDocument(8, 8), 8, 8)
        assert np.all(img.data == 1.0)

    def test_full_canvas_red(self):
        doc = ClipartDocument(8, 8, (Layer(square(-1, -1, 9, 9), FillColor(1, 0, 0)),))
        img = render_document(doc, 8, 8)
        assert np.allclose(img.data, [1, 0, 0])

    def test_top_layer_wins_in_overlap(self):
        doc = ClipartDocument(
            16,
            16,
            (
                Layer(square(0, 0, 10, 16), FillColor(1, 0, 0)),
                Layer(square(6, 0, 16, 16), FillColor(0, 0, 1)),
            ),
        )
        img = render_document(doc, 16, 16)
        assert np.allclose(img.data[8, 8], [0, 0, 1])  # overlap zone
        assert np.allclose(img.data[8, 2], [1, 0, 0])
        assert np.allclose(img.data[8, 14], [0, 0, 1])

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        doc = ClipartDocument(
            32, 32, tuple(Layer(random_blob(rng, 4, 28), FillColor(*rng.random(3))) for _ in range(3))
        )
        a = render_document(doc, 32, 32)
        b = render_document(doc, 32, 32)
        assert np.array_equal(a.data, b.data)

    def test_layer_swap_changes_only_intersection(self):
        a_path, b_path = square(2, 2, 20, 20), square(12, 12, 30, 30)
        red, blue = FillColor(1, 0, 0), FillColor(0, 0, 1)
        doc1 = ClipartDocument(32, 32, (Layer(a_path, red), Layer(b_path, blue)))
        doc2 = ClipartDocument(32, 32, (Layer(b_path, blue), Layer(a_path, red)))
        i1 = render_document(doc1, 32, 32).data
        i2 = render_document(doc2, 32, 32).data
        changed = np.any(i1 != i2, axis=2)
        ma = rasterize_mask(a_path, 32, 32).data > 0
        mb = rasterize_mask(b_path, 32, 32).data > 0
        assert np.all(changed <= (ma & mb))


class TestSoftMask:
    def test_deep_interior_saturates(self):
        path = square(8, 8, 56, 56)
        sm = soft_mask(path, 64, 64, SoftRenderParams(bandwidth=1.0, supersample=1))
        assert sm.mask.data[32, 32] == pytest.approx(1.0, abs=1e-6)
        assert sm.mask.data[1, 1] == pytest.approx(0.0, abs=1e-6)

    def test_boundary_is_half(self):
        # vertical edge at x = 8.5 passes exactly through pixel centers
        path = square(8.5, 0, 20, 64)
        sm = soft_mask(path, 64, 64, SoftRenderParams(bandwidth=2.0, supersample=1))
        assert sm.mask.data[32, 8] == pytest.approx(0.5, abs=1e-9)

    def test_bandwidth_convergence_to_hard_mask(self):
        path = random_blob(np.random.default_rng(5))
        hard = rasterize_mask(path, 64, 64, 4).data
        prev_band = None
        for bw in (2.0, 1.0, 0.5, 0.25):
            sm = soft_mask(path, 64, 64, SoftRenderParams(bandwidth=bw, supersample=4))
            diff = np.abs(sm.mask.data - hard)
            band = diff > 0.5
            # large disagreement confined to a shrinking boundary band
            count = int(band.sum())
            if prev_band is not None:
                assert count <= prev_band + 2
            prev_band = count
            interior = hard == 1.0
            assert sm.mask.data[interior].min() >= 0.5
        assert prev_band <= 8

    def test_interior_monotone_in_bandwidth(self):
        path = square(8, 8, 56, 56)
        values = []
        for bw in (4.0, 2.0, 1.0, 0.5):
            sm = soft_mask(path, 64, 64, SoftRenderParams(bandwidth=bw, supersample=1))
            values.append(sm.mask.data[20, 20])
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))


class TestRenderLoss:
    def test_identical_zero(self):
        img = RasterImage(np.random.default_rng(0).random((4, 4, 3)))
        assert render_loss(img, img) == 0.0

    def test_all_zero_vs_all_one(self):
        a = RasterImage(np.zeros((2, 2, 1)))
        b = RasterImage(np.ones((2, 2, 1)))
        assert render_loss(a, b) == 4.0

    def test_matches_naive_double_loop(self):
        rng = np.random.default_rng(4)
        a = RasterImage(rng.random((5, 6, 3)))
        b = RasterImage(rng.random((5, 6, 3)))
        ref = 0.0
        for y in range(5):
            for x in range(6):
                for c in range(3):
                    ref += (a.data[y, x, c] - b.data[y, x, c]) ** 2
        assert render_loss(a, b) == pytest.approx(ref, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(RasterError):
            render_loss(RasterImage(np.zeros((2, 2, 3))), RasterImage(np.zeros((3, 2, 3))))


class TestRenderLossGrad:
    def test_zero_gradient_at_match(self):
        path = square(8, 8, 24, 24)
        color = np.array([0.3, 0.6, 0.9])
        bg = RasterImage.full(32, 32, (1.0, 1.0, 1.0))
        params = SoftRenderParams(bandwidth=1.0, supersample=1)
        sm = soft_mask(path, 32, 32, params)
        target = composite(bg, sm.mask, color)
        grad = render_loss_grad(bg, path, color, target, params)
        assert grad.loss == pytest.approx(0.0, abs=1e-18)
        assert np.allclose(grad.points, 0.0)
        assert np.allclose(grad.color, 0.0)

    def test_color_gradient_closed_form_uniform_mask(self):
        # full-canvas square: coverage 1 everywhere
        path = square(-10, -10, 42, 42)
        w = h = 32
        bg = RasterImage.full(w, h, (0.0, 0.0, 0.0))
        target = RasterImage.full(w, h, (0.25, 0.5, 0.75))
        color = np.array([0.5, 0.5, 0.5])
        grad = render_loss_grad(
            bg, path, color, target, SoftRenderParams(bandwidth=0.5, supersample=1)
        )
        expected = 2.0 * w * h * (color - np.array([0.25, 0.5, 0.75]))
        assert np.allclose(grad.color, expected, rtol=1e-4)

    def test_geometry_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(12)
        path = random_blob(rng)
        bg = RasterImage.full(64, 64, (1.0, 1.0, 1.0))
        target = RasterImage(np.clip(rng.random((64, 64, 3)), 0, 1))
        color = rng.random(3)
        params = SoftRenderParams(bandwidth=1.2, supersample=1)
        grad = render_loss_grad(bg, path, color, target, params)
        space = PathParamSpace.of(path)
        theta = space.params(path)
        h = 1e-3
        ok = 0
        total = 0
        for i in range(space.n_points):
            for c in range(2):
                tp, tm = theta.copy(), theta.copy()
                tp[i, c] += h
                tm[i, c] -= h
                fd = (
                    soft_render_loss(bg, space.path(tp), color, target, params)
                    - soft_render_loss(bg, space.path(tm), color, target, params)
                ) / (2 * h)
                err = abs(grad.points[i, c] - fd)
                total += 1
                if err <= 1e-6 or err / max(abs(fd), 1e-12) <= 0.02:
                    ok += 1
        assert ok / total >= 0.95


class TestImageIO:
    def test_quantize_round_half_up(self):
        data = np.array([[[0.0, 0.5 / 255, 1.5 / 255]]])
        assert quantize8(data).ravel().tolist() == [0, 1, 2]
        assert quantize8(np.array([[[1.0]]])).ravel().tolist() == [255]
        assert quantize8(np.array([[[2.0]]])).ravel().tolist() == [255]  # clamped

    def test_png_roundtrip(self, tmp_path):
        rng = np.random.default_rng(6)
        img = RasterImage(rng.random((16, 12, 3)))
        path = tmp_path / "img.png"
        write_png(img, path)
        back = read_image(path)
        expect = quantize8(img.data).astype(float) / 255.0
        assert np.allclose(back.data, expect, atol=1e-12)

    def test_ppm_matches_quantization(self, tmp_path):
        rng = np.random.default_rng(7)
        img = RasterImage(rng.random((4, 5, 3)))
        path = tmp_path / "img.ppm"
        write_ppm(img, path)
        raw = path.read_bytes()
        assert raw.startswith(b"P6\n5 4\n255\n")
        assert raw[len(b"P6\n5 4\n255\n"):] == quantize8(img.data).tobytes()
        back = read_image(path)
        assert np.allclose(back.data, quantize8(img.data).astype(float) / 255.0)

    def test_image_difference_metric(self):
        a = RasterImage(np.zeros((2, 2, 3)))
        b = RasterImage(np.full((2, 2, 3), 0.5))
        assert image_difference(a, b) == pytest.approx(0.5)


class TestValidation:
    def test_out_of_range_image_rejected(self):
        with pytest.raises(RasterError):
            RasterImage(np.full((2, 2, 3), 1.5))

    def test_bad_channel_count(self):
        with pytest.raises(RasterError):
            RasterImage(np.zeros((2, 2, 2)))

    def test_mask_range(self):
        with pytest.raises(RasterError):
            MaskImage(np.full((2, 2), -0.1))
