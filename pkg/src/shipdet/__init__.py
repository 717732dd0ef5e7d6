"""Deterministic oriented-bounding-box detection toolkit."""

from .anchors import (
    MatchConfig,
    MatchResult,
    Minibatch,
    PyramidLevelConfig,
    RPN_MATCH,
    STAGE2_MATCH,
    default_levels,
    generate_anchors,
    grid_size_for_image,
    match_anchors,
    sample_minibatch,
)
from .dataset_io import (
    Annotation,
    TilePlan,
    assign_to_tile,
    merge_tiles,
    parse_dota,
    parse_srss,
    parse_srss_contour,
    partition_annotations,
    plan_tiles,
    read_annotations,
    read_detections,
    write_annotations,
    write_detections,
)
from .encoding import (
    RegressionTarget,
    decode,
    decode_h,
    encode,
    encode_h,
    prow_side_from_contour,
    prow_vector,
    remap_prow_side,
)
from .errors import (
    DegenerateGeometryError,
    InvalidBoxError,
    OutOfRangeError,
    ParseError,
    ShipdetError,
)
from .evaluation import (
    EvalConfig,
    EvalCounts,
    EvalReport,
    average_precision,
    evaluate,
    match_detections,
    precision_recall_f1,
    prow_accuracy,
    report_to_dict,
)
from .geometry import (
    HorizontalBox,
    Polygon,
    RotatedBox,
    bounding_hbox,
    canonical_angle,
    canonicalize,
    canonicalize_wraps,
    convex_intersection,
    horizontal_iou,
    iou_rasterized,
    min_area_rect,
    parse_box_literal,
    point_in_box,
    polygon_area,
    skew_iou,
    to_corners,
)
from .loss import (
    LossBreakdown,
    LossSample,
    LossWeights,
    cls_loss,
    multitask_loss,
    reg_loss,
    smooth_l1,
    smooth_l1_grad,
)
from .nms import Detection, RnmsConfig, angle_diff_deg, hnms, rnms, soft_nms
from .sampling import FeatureGrid, bilinear_sample, geometric_mask, roi_align, rroi_align

__version__ = "0.1.0"
