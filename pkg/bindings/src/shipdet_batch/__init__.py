"""Batch-matrix entry points over the shipdet core.

Boxes cross the boundary as contiguous (N, 5) float arrays of
(cx, cy, w, h, theta_deg); every row is canonicalized on the way in.
All results delegate to the core's scalar operations, so decisions and
values are identical to the library and CLI on the same inputs.
"""

from __future__ import annotations

import numpy as np

import shipdet
from shipdet.dataset_io import read_annotations, read_detections_with_classes
from shipdet.encoding import RegressionTarget, decode, encode
from shipdet.evaluation import EvalConfig, EvalReport, evaluate
from shipdet.geometry import RotatedBox, canonicalize, skew_iou
from shipdet.nms import Detection, RnmsConfig, rnms

__version__ = shipdet.__version__

__all__ = [
    "RnmsConfig",
    "batch_decode",
    "batch_encode",
    "batch_rnms",
    "batch_skew_iou",
    "evaluate_files",
    "__version__",
]


def _as_boxes(arr, name: str) -> list[RotatedBox]:
    a = np.ascontiguousarray(arr, dtype=np.float64)
    if a.size == 0:
        return []
    if a.ndim != 2 or a.shape[1] != 5:
        raise ValueError(f"{name} must be an (N, 5) array, got shape {a.shape}")
    return [canonicalize(RotatedBox(*row)) for row in a]


def batch_skew_iou(a, b) -> np.ndarray:
    """Pairwise skew IoU: (N, 5) x (M, 5) -> (N, M)."""
    boxes_a = _as_boxes(a, "a")
    boxes_b = _as_boxes(b, "b")
    out = np.zeros((len(boxes_a), len(boxes_b)), dtype=np.float64)
    for i, ba in enumerate(boxes_a):
        for j, bb in enumerate(boxes_b):
            out[i, j] = skew_iou(ba, bb)
    return out


def batch_rnms(boxes, scores, cfg: RnmsConfig | None = None) -> np.ndarray:
    """Rotational NMS over one group; returns kept row indices in the
    core's output order."""
    rows = _as_boxes(boxes, "boxes")
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(s) != len(rows):
        raise ValueError(f"scores length {len(s)} != boxes length {len(rows)}")
    dets = [Detection(box=b, score=float(v), class_id=0, image_id="") for b, v in zip(rows, s)]
    index_of = {id(d): i for i, d in enumerate(dets)}
    kept = rnms(dets, cfg or RnmsConfig())
    return np.array([index_of[id(d)] for d in kept], dtype=np.int64)


def batch_encode(gt, anchors) -> np.ndarray:
    """Row-wise regression targets (tx, ty, tw, th, ttheta_rad)."""
    g = _as_boxes(gt, "gt")
    a = _as_boxes(anchors, "anchors")
    if len(g) != len(a):
        raise ValueError(f"gt rows {len(g)} != anchor rows {len(a)}")
    out = np.zeros((len(g), 5), dtype=np.float64)
    for i, (gb, ab) in enumerate(zip(g, a)):
        t = encode(gb, ab)
        out[i] = (t.tx, t.ty, t.tw, t.th, t.ttheta)
    return out


def batch_decode(anchors, targets) -> np.ndarray:
    """Inverse of :func:`batch_encode`; rows are canonical boxes."""
    a = _as_boxes(anchors, "anchors")
    t = np.ascontiguousarray(targets, dtype=np.float64)
    if t.size == 0 and not a:
        return np.zeros((0, 5), dtype=np.float64)
    if t.ndim != 2 or t.shape[1] != 5:
        raise ValueError(f"targets must be an (N, 5) array, got shape {t.shape}")
    if len(a) != t.shape[0]:
        raise ValueError(f"anchor rows {len(a)} != target rows {t.shape[0]}")
    out = np.zeros((len(a), 5), dtype=np.float64)
    for i, (ab, row) in enumerate(zip(a, t)):
        box = decode(ab, RegressionTarget(row[0], row[1], row[2], row[3], row[4]))
        out[i] = box.astuple()
    return out


def evaluate_files(
    det_path,
    gt_path,
    iou_thresh: float = 0.5,
    ap_mode: str = "all-point",
    class_names=None,
) -> EvalReport:
    """Evaluate a detection file against an annotation file.

    Classes default to the sorted class names found in the ground truth,
    matching the CLI ``eval`` subcommand.
    """
    gts = read_annotations(gt_path)
    classes = tuple(class_names) if class_names else tuple(sorted({g.class_name for g in gts}))
    dets, _ = read_detections_with_classes(det_path, class_names=classes)
    cfg = EvalConfig(iou_thresh=iou_thresh, ap_mode=ap_mode, class_names=classes)
    return evaluate(dets, gts, cfg)
