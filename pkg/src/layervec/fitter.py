"""Iterative layer-by-layer raster-to-vector fitting.

Each round decides whether the remaining residual warrants a new layer,
seeds an ellipse where the residual is strongest, and refines its control
points and fill color by adaptive-moment gradient descent on the soft
rendering loss (bandwidth annealed coarse to fine, steps accepted only if
the loss does not increase). Accepted layers are composited with hard
masks; a layer that fails to reduce the residual stops the loop. A
supervised variant fits one path to a known target path under the combined
geometric loss, with every matching (cyclic shift, assignment, reversal)
frozen per evaluation for the gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath
from typing import Callable, Optional

import numpy as np
from scipy import ndimage
from scipy.optimize import linear_sum_assignment

from .document import ClipartDocument, FillColor, Layer
from .geometry import (
    ClosedPath,
    PathParamSpace,
    Point,
    SegmentKind,
    SymmetryAxis,
    cubic,
    laplacian,
    sample_path,
    split_counts,
)
from .losses import LossBreakdown, LossWeights, control_points
from .raster import (
    RasterImage,
    RenderGradient,
    SoftRenderParams,
    composite,
    image_difference,
    rasterize_mask,
    render_document,
    render_loss_grad,
    soft_render_loss,
)
from .regularize import RegularizeConfig, regularize


class FitError(RuntimeError):
    pass


class FitDivergence(FitError):
    """The optimization produced a non-finite loss."""


@dataclass(frozen=True)
class FitConfig:
    max_layers: int = 12
    residual_stop: float = 0.01
    seg_count: int = 8
    opt_steps: int = 300
    step_size: float = 0.02
    bandwidth_schedule: tuple[tuple[int, float], ...] = ((0, 2.0), (150, 1.0), (250, 0.5))
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_layers < 1 or self.seg_count < 1 or self.opt_steps < 1:
            raise ValueError("counts must be positive")
        if not (self.residual_stop > 0 and self.step_size > 0):
            raise ValueError("thresholds must be positive")
        if not self.bandwidth_schedule or self.bandwidth_schedule[0][0] != 0:
            raise ValueError("bandwidth schedule must start at step 0")
        for _, bw in self.bandwidth_schedule:
            if bw <= 0:
                raise ValueError("bandwidths must be positive")


@dataclass
class FitState:
    """Mutable loop state; `rendered` always equals the rendered document."""

    document: ClipartDocument
    rendered: RasterImage
    target: RasterImage
    residual: RasterImage
    layer_count: int

    @classmethod
    def initial(cls, target: RasterImage) -> "FitState":
        doc = ClipartDocument(float(target.width), float(target.height))
        rendered = render_document(doc, target.width, target.height)
        state = cls(doc, rendered, target, None, 0)  # type: ignore[arg-type]
        state.residual = residual(state)
        return state

    def check_coherence(self) -> None:
        ref = render_document(self.document, self.target.width, self.target.height)
        if not np.array_equal(ref.data, self.rendered.data):
            raise FitError("state incoherent: rendered image does not match stack")
        if self.layer_count != len(self.document.layers):
            raise FitError("state incoherent: layer count mismatch")


def residual(state: FitState) -> RasterImage:
    """Per-pixel mean absolute channel difference |rendered - target|."""
    if state.rendered.data.shape != state.target.data.shape:
        raise FitError("rendered and target shapes differ")
    diff = np.mean(np.abs(state.rendered.data - state.target.data), axis=2)
    return RasterImage(diff[:, :, None])


def mean_residual(state: FitState) -> float:
    return float(state.residual.data.mean())


def should_continue(state: FitState, cfg: FitConfig) -> bool:
    if state.layer_count >= cfg.max_layers:
        return False
    return mean_residual(state) >= cfg.residual_stop


@dataclass(frozen=True, eq=False)
class SeedMap:
    """Normalized residual mass of the strongest uncovered region."""

    data: np.ndarray
    center: tuple[float, float]

    def __post_init__(self) -> None:
        self.data.setflags(write=False)


def seed_map(state: FitState) -> SeedMap:
    res = state.residual.data[:, :, 0]
    peak = float(res.max())
    if peak <= 0.0:
        raise FitError("seed_map on an exact match (check should_continue first)")
    binary = res >= 0.5 * peak
    labels, n = ndimage.label(binary)
    if n == 0:
        raise FitError("no residual component found")
    sizes = ndimage.sum_labels(np.ones_like(res), labels, index=np.arange(1, n + 1))
    best = int(np.argmax(sizes)) + 1
    mass = np.where(labels == best, res, 0.0)
    total = float(mass.sum())
    data = mass / total
    ys, xs = np.nonzero(mass)
    w = mass[ys, xs] / total
    cx = float(np.sum(w * (xs + 0.5)))
    cy = float(np.sum(w * (ys + 0.5)))
    return SeedMap(data, (cx, cy))


def _ellipse_path(
    cx: float,
    cy: float,
    ax_u: np.ndarray,
    ax_v: np.ndarray,
    seg_count: int,
) -> ClosedPath:
    """seg_count cubic segments tracing the ellipse c + cos(t) u + sin(t) v."""
    step = 2.0 * math.pi / seg_count
    alpha = (4.0 / 3.0) * math.tan(step / 4.0)
    centers = np.array([cx, cy])

    def pos(t: float) -> np.ndarray:
        return centers + math.cos(t) * ax_u + math.sin(t) * ax_v

    def vel(t: float) -> np.ndarray:
        return -math.sin(t) * ax_u + math.cos(t) * ax_v

    segs = []
    pts = [Point(*pos(i * step)) for i in range(seg_count)]
    for i in range(seg_count):
        t0, t1 = i * step, (i + 1) * step
        a = pts[i]
        b = pts[(i + 1) % seg_count]
        c1 = Point(*(np.array((a.x, a.y)) + alpha * vel(t0)))
        c2 = Point(*(np.array((b.x, b.y)) - alpha * vel(t1)))
        segs.append(cubic(a, c1, c2, b))
    return ClosedPath(tuple(segs))


def init_layer(smap: SeedMap, state: FitState, cfg: FitConfig) -> Layer:
    """Ellipse matched to the seed component's second moments, colored with
    the mean target color inside the component."""
    h, w = smap.data.shape
    mask = smap.data > 0
    npx = int(mask.sum())
    cx, cy = smap.center
    if npx < 4:
        u = np.array([2.0, 0.0])
        v = np.array([0.0, 2.0])
    else:
        ys, xs = np.nonzero(mask)
        wgt = smap.data[ys, xs]
        dx = xs + 0.5 - cx
        dy = ys + 0.5 - cy
        cov = np.array(
            [
                [np.sum(wgt * dx * dx), np.sum(wgt * dx * dy)],
                [np.sum(wgt * dx * dy), np.sum(wgt * dy * dy)],
            ]
        )
        evals, evecs = np.linalg.eigh(cov)
        radii = 2.0 * np.sqrt(np.maximum(evals, 0.25))
        radii = np.minimum(radii, max(w, h) / 2.0)
        u = evecs[:, 0] * radii[0]
        v = evecs[:, 1] * radii[1]
    path = _ellipse_path(cx, cy, u, v, cfg.seg_count)
    tgt = state.target.data
    if npx > 0:
        color = tgt[mask].mean(axis=0)
    else:
        color = tgt.mean(axis=(0, 1))
    return Layer(path, FillColor.clamped(*color))


class _Adam:
    def __init__(self, n: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def snapshot(self):
        return self.m.copy(), self.v.copy(), self.t

    def restore(self, snap) -> None:
        self.m, self.v, self.t = snap[0].copy(), snap[1].copy(), snap[2]

    def direction(self, grad: np.ndarray) -> np.ndarray:
        """Update moments and return the unit-learning-rate step direction."""
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return mhat / (np.sqrt(vhat) + self.eps)


def _descend(
    x0: np.ndarray,
    lr: np.ndarray,
    n_steps: int,
    forward: Callable[[np.ndarray], float],
    forward_grad: Callable[[np.ndarray], tuple[float, np.ndarray, dict]],
    on_step: Optional[Callable[[int, float, dict], None]] = None,
    loss_changes_at: Optional[Callable[[int], bool]] = None,
) -> np.ndarray:
    """Adam with backtracking: a step is accepted only if the loss does not
    increase; on repeated rejection the run stops. Stops early when the loss
    plateaus."""
    x = x0.copy()
    adam = _Adam(len(x))
    prev_loss = None
    best_loss = math.inf
    since_best = 0
    for step in range(n_steps):
        refresh = prev_loss is None
        if loss_changes_at is not None and loss_changes_at(step):
            refresh = True
        if refresh:
            prev_loss = forward(x)
            if not math.isfinite(prev_loss):
                raise FitDivergence(f"non-finite loss at step {step}")
        loss, grad, terms = forward_grad(x)
        if not (math.isfinite(loss) and np.isfinite(grad).all()):
            raise FitDivergence(f"non-finite loss or gradient at step {step}")
        if on_step is not None:
            on_step(step, loss, terms)
        snap = adam.snapshot()
        direction = adam.direction(grad)
        slack = 1e-9 * (1.0 + abs(prev_loss))
        scale = 1.0
        accepted = False
        for _ in range(8):
            cand = x - scale * lr * direction
            cand_loss = forward(cand)
            if math.isfinite(cand_loss) and cand_loss <= prev_loss + slack:
                x = cand
                prev_loss = cand_loss
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            adam.restore(snap)
            break
        if prev_loss < best_loss - 1e-6 * (1.0 + abs(best_loss)):
            best_loss = prev_loss
            since_best = 0
        else:
            since_best += 1
            if since_best >= 30:
                break
    return x


def _bandwidth_at(schedule: tuple[tuple[int, float], ...], step: int) -> float:
    bw = schedule[0][1]
    for s, b in schedule:
        if step >= s:
            bw = b
    return bw


_SOFT_POLY_SAMPLES = 8


def _smooth_self(weights_matrix: np.ndarray, theta: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of squared Laplacians of the sampled polyline, and its gradient."""
    pts = weights_matrix @ theta
    lap = laplacian(pts)
    loss = float(np.sum(lap * lap))
    glap = 2.0 * (lap - 0.5 * (np.roll(lap, -1, axis=0) + np.roll(lap, 1, axis=0)))
    return loss, weights_matrix.T @ glap


def fit_layer(
    state: FitState, init: Layer, cfg: FitConfig, trace: Optional[list[dict]] = None
) -> Layer:
    """Refine one layer over the current render so it matches the target.

    Minimizes the soft rendering loss plus w_smooth times the layer's own
    polyline Laplacian energy, over control points and color. Colors are
    optimized unclamped and clamped on output.
    """
    space = PathParamSpace.of(init.path)
    wmat = space.sampling_matrix([_SOFT_POLY_SAMPLES] * space.n_segments)
    p = space.n_points
    x0 = np.concatenate([space.params(init.path).ravel(), init.color.as_array()])
    scale = float(max(state.target.width, state.target.height))
    lr = np.concatenate(
        [np.full(2 * p, cfg.step_size * scale), np.full(3, cfg.step_size)]
    )
    w_smooth = cfg.weights.w_smooth
    bg = state.rendered
    target = state.target
    current_bw = {"value": None}

    def params_of(x: np.ndarray) -> SoftRenderParams:
        return SoftRenderParams(
            bandwidth=current_bw["value"], supersample=1, poly_samples=_SOFT_POLY_SAMPLES
        )

    def unpack(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return x[: 2 * p].reshape(p, 2), x[2 * p :]

    def forward(x: np.ndarray) -> float:
        theta, color = unpack(x)
        loss = soft_render_loss(bg, space.path(theta), color, target, params_of(x))
        smooth, _ = _smooth_self(wmat, theta)
        return loss + w_smooth * smooth

    def forward_grad(x: np.ndarray) -> tuple[float, np.ndarray, dict]:
        theta, color = unpack(x)
        rg: RenderGradient = render_loss_grad(
            bg, space.path(theta), color, target, params_of(x)
        )
        smooth, gsmooth = _smooth_self(wmat, theta)
        total = rg.loss + w_smooth * smooth
        grad = np.concatenate(
            [(rg.points + w_smooth * gsmooth).ravel(), rg.color]
        )
        terms = {"total": total, "render": rg.loss, "smooth": smooth}
        return total, grad, terms

    def bw_update(step: int) -> bool:
        bw = _bandwidth_at(cfg.bandwidth_schedule, step)
        changed = bw != current_bw["value"]
        current_bw["value"] = bw
        return changed

    def on_step(step: int, loss: float, terms: dict) -> None:
        if trace is not None:
            trace.append({"step": step, **terms})

    x = _descend(
        x0,
        lr,
        cfg.opt_steps,
        forward,
        forward_grad,
        on_step=on_step,
        loss_changes_at=bw_update,
    )
    theta, color = unpack(x)
    return Layer(space.path(theta), FillColor.clamped(*color))


def _chamfer_grad(s: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """Bidirectional ordered matching loss and its gradient w.r.t. s, with
    the optimal cyclic shifts frozen."""
    k = len(s)
    d = s[:, None, :] - t[None, :, :]
    dist = np.einsum("ijk,ijk->ij", d, d)
    i = np.arange(k)
    cols = (np.arange(k)[:, None] + i[None, :]) % k
    costs = dist[i[None, :], cols].sum(axis=1)
    j1 = int(np.argmin(costs))
    costs_rev = dist.T[i[None, :], cols].sum(axis=1)
    j2 = int(np.argmin(costs_rev))
    loss = float(costs[j1] + costs_rev[j2])
    grad = 2.0 * (s - t[(j1 + i) % k])
    grad += 2.0 * (s - t[(i - j2) % k])
    return loss, grad


def _emd_grad(s: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    d = s[:, None, :] - t[None, :, :]
    dist = np.einsum("ijk,ijk->ij", d, d)
    rows, cols = linear_sum_assignment(dist)
    loss = float(dist[rows, cols].sum())
    grad = np.zeros_like(s)
    grad[rows] = 2.0 * (s[rows] - t[cols])
    return loss, grad


def _csym_grad(q: np.ndarray, axis: SymmetryAxis) -> tuple[float, np.ndarray]:
    """Control-point symmetry loss and gradient, minimizing over cyclic
    shifts and reversal of the mirrored sequence (both frozen for the
    gradient)."""
    m = len(q)
    o = np.array((axis.origin.x, axis.origin.y))
    r = axis.reflection_matrix()
    qm = (q - o) @ r + o

    def match_dir(a: np.ndarray, b: np.ndarray) -> tuple[float, int]:
        d = a[:, None, :] - b[None, :, :]
        dist = np.einsum("ijk,ijk->ij", d, d)
        i = np.arange(m)
        cols = (np.arange(m)[:, None] + i[None, :]) % m
        costs = dist[i[None, :], cols].sum(axis=1)
        j = int(np.argmin(costs))
        return float(costs[j]), j

    best = None
    for rev in (False, True):
        a = qm[::-1] if rev else qm
        c1, j1 = match_dir(a, q)
        c2, j2 = match_dir(q, a)
        if best is None or c1 + c2 < best[0]:
            best = (c1 + c2, rev, j1, j2)
    loss, rev, j1, j2 = best
    a = qm[::-1] if rev else qm
    i = np.arange(m)
    ga = np.zeros_like(q)
    gq = np.zeros_like(q)
    # direction 1: a_i matched to q_{(j1+i)%m}
    diff1 = 2.0 * (a - q[(j1 + i) % m])
    ga += diff1
    np.add.at(gq, (j1 + i) % m, -diff1)
    # direction 2: q_i matched to a_{(j2+i)%m}
    diff2 = 2.0 * (q - a[(j2 + i) % m])
    gq += diff2
    np.add.at(ga, (j2 + i) % m, -diff2)
    gqm = ga[::-1] if rev else ga
    gq += gqm @ r
    return float(loss), gq


@dataclass(frozen=True, eq=False)
class SupervisedFitResult:
    path: ClosedPath
    history: tuple[LossBreakdown, ...]

    @property
    def initial(self) -> LossBreakdown:
        return self.history[0]

    @property
    def final(self) -> LossBreakdown:
        return self.history[-1]


def fit_layer_supervised(
    init: ClosedPath,
    target_path: ClosedPath,
    axis: Optional[SymmetryAxis],
    cfg: FitConfig,
    n: int = 200,
) -> SupervisedFitResult:
    """Fit a path to a known target path under the combined geometric loss.

    Minimizes (chamfer + mover) + w_sym (sym + csym) + w_smooth * smooth by
    gradient descent; every matching is recomputed, then frozen, at each
    evaluation. Returns the optimized path and the per-term trajectory.
    """
    space = PathParamSpace.of(init)
    counts = split_counts(n, space.n_segments)
    wmat = space.sampling_matrix(counts)
    t_pts = sample_path(target_path, n).points
    t_lap = laplacian(t_pts)
    o = np.array((axis.origin.x, axis.origin.y)) if axis is not None else None
    refl = axis.reflection_matrix() if axis is not None else None

    # Control points in traversal order, as a gather over parameter indices.
    q_index: list[int] = []
    k = space.n_segments
    for si, kind in enumerate(space.kinds):
        if kind is SegmentKind.LINE:
            q_index += [si, (si + 1) % k]
        else:
            h1, h2 = space.cubic_handles(si)
            q_index += [si, h1, h2, (si + 1) % k]
    q_index_arr = np.array(q_index)

    w = cfg.weights
    bbox = target_path.bounding_box()
    scale = max(bbox[2] - bbox[0], bbox[3] - bbox[1], 1.0)
    lr = np.full(2 * space.n_points, cfg.step_size * scale)

    def evaluate(x: np.ndarray, want_grad: bool):
        theta = x.reshape(space.n_points, 2)
        s = wmat @ theta
        loss_ch, g_ch = _chamfer_grad(s, t_pts)
        loss_em, g_em = _emd_grad(s, t_pts)
        lap = laplacian(s)
        dlap = lap - t_lap
        loss_sm = float(np.sum(dlap * dlap))
        g_sm = 2.0 * (dlap - 0.5 * (np.roll(dlap, -1, axis=0) + np.roll(dlap, 1, axis=0)))
        loss_sy = 0.0
        loss_cs = 0.0
        g_s_sym = np.zeros_like(s)
        g_theta_cs = np.zeros((space.n_points, 2))
        if axis is not None:
            pm = (s - o) @ refl + o
            c1, g_rev = _chamfer_grad(pm[::-1], t_pts)
            c2, g_pm = _emd_grad(pm, t_pts)
            loss_sy = c1 + c2
            g_pm = g_pm + g_rev[::-1]
            g_s_sym = g_pm @ refl
            qpts = theta[q_index_arr]
            loss_cs, g_q = _csym_grad(qpts, axis)
            np.add.at(g_theta_cs, q_index_arr, g_q)
        total = (loss_ch + loss_em) + w.w_sym * (loss_sy + loss_cs) + w.w_smooth * loss_sm
        breakdown = LossBreakdown(total, loss_ch, loss_em, loss_sy, loss_cs, loss_sm)
        if not want_grad:
            return total, breakdown, None
        g_s = g_ch + g_em + w.w_sym * g_s_sym + w.w_smooth * g_sm
        g_theta = wmat.T @ g_s + w.w_sym * g_theta_cs
        return total, breakdown, g_theta.ravel()

    history: list[LossBreakdown] = []

    def forward(x: np.ndarray) -> float:
        return evaluate(x, False)[0]

    def forward_grad(x: np.ndarray):
        total, breakdown, grad = evaluate(x, True)
        history.append(breakdown)
        return total, grad, breakdown.as_dict()

    x0 = space.params(init).ravel()
    x = _descend(x0, lr, cfg.opt_steps, forward, forward_grad)
    final_total, final_breakdown, _ = evaluate(x, False)
    history.append(final_breakdown)
    return SupervisedFitResult(space.path(x.reshape(space.n_points, 2)), tuple(history))


def vectorize(
    target: RasterImage,
    cfg: FitConfig | None = None,
    dump_dir: str | FsPath | None = None,
    regularize_cfg: RegularizeConfig | None = None,
) -> ClipartDocument:
    """Convert a raster image into a layered vector document.

    Loops: continue-check, residual seeding, ellipse init, gradient fit,
    hard composite; a layer is accepted only if it lowers the mean residual.
    The result is regularized before being returned. Deterministic for a
    given (target, cfg).
    """
    cfg = cfg or FitConfig()
    if target.channels != 3:
        raise FitError("vectorize expects a 3-channel target")
    state = FitState.initial(target)
    dump = FsPath(dump_dir) if dump_dir is not None else None
    if dump is not None:
        dump.mkdir(parents=True, exist_ok=True)
    traces = []
    while should_continue(state, cfg):
        smap = seed_map(state)
        init = init_layer(smap, state, cfg)
        steps: list[dict] = []
        layer = fit_layer(state, init, cfg, trace=steps)
        mask = rasterize_mask(layer.path, target.width, target.height)
        new_rendered = composite(state.rendered, mask, layer.color)
        new_doc = state.document.with_layer(layer)
        new_state = FitState(
            new_doc, new_rendered, target, None, state.layer_count + 1
        )  # type: ignore[arg-type]
        new_state.residual = residual(new_state)
        if float(new_state.residual.data.mean()) > mean_residual(state):
            break
        state = new_state
        state.check_coherence()
        traces.append(steps)
        if dump is not None:
            _dump_iteration(dump, state, steps)
    doc = regularize(state.document, regularize_cfg)
    if dump is not None:
        _dump_summary(dump, traces)
    return doc


def _dump_iteration(dump: FsPath, state: FitState, steps: list[dict]) -> None:
    from .raster import write_png

    idx = state.layer_count
    write_png(state.residual, dump / f"residual_{idx:02d}.png")
    lines = ["step,total,render,smooth"]
    for row in steps:
        lines.append(
            f"{row['step']},{row['total']:.9g},{row['render']:.9g},{row['smooth']:.9g}"
        )
    (dump / f"loss_{idx:02d}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _dump_summary(dump: FsPath, traces: list[list[dict]]) -> None:
    from .report import save_loss_figure

    save_loss_figure(traces, dump / "loss_curves.png")


def evaluate_vectorization(
    doc: ClipartDocument, target: RasterImage
) -> dict[str, float]:
    """Reported quality metrics: normalized image difference and layer count."""
    out = render_document(doc, target.width, target.height)
    return {
        "image_difference": image_difference(out, target),
        "layers": float(len(doc.layers)),
    }


def gradient_check(
    seed: int,
    trials: int = 50,
    size: int = 64,
    h: float = 1e-3,
    rel_tol: float = 0.02,
    abs_floor: float = 1e-6,
) -> dict[str, float]:
    """Validate analytic rendering gradients against central differences.

    Random single-layer scenes: a random path over a random rendered
    background, scored against a random rendered target. A coordinate passes
    when the analytic and finite-difference gradients agree within rel_tol
    relatively or abs_floor absolutely.
    """
    from .pathgen import GenConfig, random_closed_path

    rng = np.random.default_rng(seed)
    gcfg = GenConfig(curve_count_range=(3, 5), symmetric_prob=0.0, canvas=(size, size), seed=seed)
    coords = 0
    ok = 0
    max_rel = 0.0
    for _ in range(trials):
        path, _ = random_closed_path(gcfg, rng)
        scene, _ = random_closed_path(gcfg, rng)
        bg = render_document(
            ClipartDocument(float(size), float(size), (Layer(scene, FillColor(*rng.random(3))),)),
            size,
            size,
        )
        target = render_document(
            ClipartDocument(float(size), float(size), (Layer(path, FillColor(*rng.random(3))),)),
            size,
            size,
        )
        color = rng.random(3)
        params = SoftRenderParams(
            bandwidth=float(rng.uniform(0.8, 2.0)), supersample=1
        )
        grad = render_loss_grad(bg, path, color, target, params)
        space = PathParamSpace.of(path)
        theta0 = space.params(path)
        for i in range(space.n_points):
            for c in range(2):
                tp = theta0.copy()
                tp[i, c] += h
                tm = theta0.copy()
                tm[i, c] -= h
                lp = soft_render_loss(bg, space.path(tp), color, target, params)
                lm = soft_render_loss(bg, space.path(tm), color, target, params)
                fd = (lp - lm) / (2.0 * h)
                err = abs(grad.points[i, c] - fd)
                rel = err / max(abs(fd), 1e-12)
                coords += 1
                if err <= abs_floor or rel <= rel_tol:
                    ok += 1
                    max_rel = max(max_rel, min(rel, 1.0) if err > abs_floor else 0.0)
                else:
                    max_rel = max(max_rel, rel)
        for c in range(3):
            cp = color.copy()
            cp[c] += h
            cm = color.copy()
            cm[c] -= h
            fd = (
                soft_render_loss(bg, path, cp, target, params)
                - soft_render_loss(bg, path, cm, target, params)
            ) / (2.0 * h)
            err = abs(grad.color[c] - fd)
            rel = err / max(abs(fd), 1e-12)
            coords += 1
            if err <= abs_floor or rel <= rel_tol:
                ok += 1
            else:
                max_rel = max(max_rel, rel)
    return {
        "coords": float(coords),
        "frac_ok": ok / coords if coords else 0.0,
        "max_rel_err": max_rel,
    }
