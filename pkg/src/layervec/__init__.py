"""layervec: layered vector clipart toolkit.

Closed-path documents, curve sampling, point-set losses, differentiable
rasterization, random path synthesis, shape regularization, and an
iterative raster-to-vector fitter, with SVG subset I/O and a CLI.
"""

from .document import ClipartDocument, FillColor, Layer
from .geometry import (
    ClosedPath,
    CurveSegment,
    Point,
    SamplePolyline,
    SegmentKind,
    SymmetryAxis,
    cubic,
    eval_curve,
    laplacian,
    line,
    mirror_path,
    path_centroid,
    polygonize,
    sample_path,
    self_intersects,
)
from .losses import (
    ControlPointSet,
    LossBreakdown,
    LossWeights,
    control_points,
    control_symmetry_loss,
    emd,
    geometric_loss,
    match_loss,
    ordered_chamfer,
    sample_symmetry_loss,
    smoothness_loss,
)
from .raster import (
    MaskImage,
    RasterImage,
    SoftRenderParams,
    composite,
    image_difference,
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
from .pathgen import GenConfig, emit_corpus, random_canvas, random_closed_path
from .regularize import RegularizeConfig, circle_path, regularize
from .fitter import (
    FitConfig,
    FitState,
    fit_layer,
    fit_layer_supervised,
    init_layer,
    residual,
    seed_map,
    should_continue,
    vectorize,
)
from .svg_io import DatasetStats, SvgParseError, dataset_stats, parse_svg, write_svg

__version__ = "0.1.0"
