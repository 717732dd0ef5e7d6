"""Rotated-IoU detection metrics: greedy matching, precision/recall/F1,
average precision, and prow-direction accuracy.

Matching follows the VOC-style protocol: detections in descending score
order claim the highest-IoU unmatched ground truth of their class and
image; a claim sticks when the skew IoU reaches the threshold. Difficult
ground truths neither count as false negatives nor consume matches;
detections overlapping only difficult boxes are ignored outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset_io import Annotation
from .encoding import prow_vector
from .geometry import skew_iou
from .nms import Detection

AP_ALL_POINT = "all-point"
AP_ELEVEN_POINT = "11-point"

PRPoint = tuple[float, float, float]  # recall, precision, score threshold


@dataclass(frozen=True)
class EvalCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError(f"counts must be nonnegative: {self}")


@dataclass(frozen=True)
class EvalConfig:
    iou_thresh: float = 0.5
    ap_mode: str = AP_ALL_POINT
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if not 0.0 < self.iou_thresh <= 1.0:
            raise ValueError(f"iou_thresh must be in (0, 1], got {self.iou_thresh}")
        if self.ap_mode not in (AP_ALL_POINT, AP_ELEVEN_POINT):
            raise ValueError(f"unknown ap_mode {self.ap_mode!r}")


@dataclass
class MatchOutcome:
    """Per-detection flags in input order plus per-gt matched flags.

    A detection with neither tp nor fp set was ignored (its only
    qualifying overlap was a difficult ground truth).
    """

    tp: np.ndarray
    fp: np.ndarray
    matched_gt: np.ndarray
    gt_matched: np.ndarray


@dataclass
class ClassEval:
    ap: float
    best_f1: float
    curve: list[PRPoint]
    num_gts: int
    num_dets: int


@dataclass
class ProwAccuracy:
    overall: float | None
    bins: tuple[float | None, ...]
    bin_counts: tuple[int, ...]


@dataclass
class EvalReport:
    per_class: dict[str, ClassEval]
    mean_ap: float
    prow: ProwAccuracy
    config: EvalConfig


def _det_order_key(d: Detection):
    return (-d.score, d.image_id, d.box.cx, d.box.cy, d.box.w, d.box.h, d.box.theta, d.class_id)


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[Annotation],
    iou_thresh: float = 0.5,
) -> MatchOutcome:
    """Greedy one-to-one matching for a single image's single class."""
    images = {d.image_id for d in dets} | {g.image_id for g in gts}
    if len(images) > 1:
        raise ValueError(f"match_detections is per image, got ids {sorted(images)}")

    n, m = len(dets), len(gts)
    tp = np.zeros(n, dtype=bool)
    fp = np.zeros(n, dtype=bool)
    matched_gt = np.full(n, -1, dtype=np.int64)
    gt_matched = np.zeros(m, dtype=bool)

    order = sorted(range(n), key=lambda i: _det_order_key(dets[i]))
    for i in order:
        best_j, best_iou = -1, 0.0
        diff_hit = False
        for j, g in enumerate(gts):
            iou = skew_iou(dets[i].box, g.box)
            if iou < iou_thresh:
                continue
            if g.difficult:
                diff_hit = True
            elif not gt_matched[j] and iou > best_iou:
                best_j, best_iou = j, iou
        if best_j >= 0:
            tp[i] = True
            matched_gt[i] = best_j
            gt_matched[best_j] = True
        elif not diff_hit:
            fp[i] = True
    return MatchOutcome(tp, fp, matched_gt, gt_matched)


def precision_recall_f1(counts: EvalCounts) -> tuple[float, float, float]:
    """(precision, recall, F1); any 0/0 is defined as 0."""
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def average_precision(curve: Sequence[PRPoint], mode: str = AP_ALL_POINT) -> float:
    """Integrate a PR curve.

    all-point integrates the right-monotonized precision envelope over
    recall; 11-point averages the envelope at recalls 0, 0.1, ..., 1.
    """
    if not curve:
        return 0.0
    recalls = [pt[0] for pt in curve]
    precisions = [pt[1] for pt in curve]
    if mode == AP_ALL_POINT:
        mrec = [0.0] + recalls + [1.0]
        mpre = [0.0] + precisions + [0.0]
        for i in range(len(mpre) - 2, -1, -1):
            mpre[i] = max(mpre[i], mpre[i + 1])
        ap = 0.0
        for i in range(1, len(mrec)):
            if mrec[i] != mrec[i - 1]:
                ap += (mrec[i] - mrec[i - 1]) * mpre[i]
        return ap
    if mode == AP_ELEVEN_POINT:
        total = 0.0
        for r in (i / 10 for i in range(11)):
            total += max((p for rr, p, _ in zip(recalls, precisions, recalls) if rr >= r - 1e-12), default=0.0)
        return total / 11.0
    raise ValueError(f"unknown ap mode {mode!r}")


def _heading_bin(dx: float, dy: float) -> int:
    angle = math.atan2(dy, dx) % (2 * math.pi)
    return min(int(angle / (math.pi / 4)), 7)


def prow_accuracy(pairs: Sequence[tuple[Detection, Annotation]]) -> ProwAccuracy:
    """Fraction of matched pairs whose predicted side equals the truth.

    Heading bins are the 8 compass octants of the ground-truth prow
    vector; empty bins report None.
    """
    hits = [0] * 8
    totals = [0] * 8
    for det, gt in pairs:
        if det.prow is None or gt.prow is None:
            continue
        b = _heading_bin(*prow_vector(gt.box, gt.prow))
        totals[b] += 1
        if det.prow == gt.prow:
            hits[b] += 1
    grand = sum(totals)
    return ProwAccuracy(
        overall=(sum(hits) / grand) if grand else None,
        bins=tuple((h / t) if t else None for h, t in zip(hits, totals)),
        bin_counts=tuple(totals),
    )


def _class_curve(
    dets: list[Detection], gts: list[Annotation], cfg: EvalConfig
) -> tuple[ClassEval, list[tuple[Detection, Annotation]]]:
    by_image: dict[str, tuple[list[Detection], list[Annotation]]] = {}
    for g in gts:
        by_image.setdefault(g.image_id, ([], []))[1].append(g)
    for d in dets:
        by_image.setdefault(d.image_id, ([], []))[0].append(d)

    rows: list[tuple[Detection, bool, bool, Annotation | None]] = []
    for image_id in sorted(by_image):
        img_dets, img_gts = by_image[image_id]
        out = match_detections(img_dets, img_gts, cfg.iou_thresh)
        for i, d in enumerate(img_dets):
            matched = img_gts[out.matched_gt[i]] if out.matched_gt[i] >= 0 else None
            rows.append((d, bool(out.tp[i]), bool(out.fp[i]), matched))

    n_pos = sum(1 for g in gts if not g.difficult)
    rows.sort(key=lambda r: _det_order_key(r[0]))

    curve: list[PRPoint] = []
    tp_pairs: list[tuple[Detection, Annotation]] = []
    tp_cum = fp_cum = 0
    best_f1 = 0.0
    for d, is_tp, is_fp, matched in rows:
        if not (is_tp or is_fp):
            continue  # ignored: matched only difficult ground truth
        tp_cum += int(is_tp)
        fp_cum += int(is_fp)
        if is_tp and matched is not None:
            tp_pairs.append((d, matched))
        _, _, f1 = precision_recall_f1(EvalCounts(tp_cum, fp_cum, max(n_pos - tp_cum, 0)))
        best_f1 = max(best_f1, f1)
        recall = tp_cum / n_pos if n_pos else 0.0
        precision = tp_cum / (tp_cum + fp_cum)
        curve.append((recall, precision, d.score))

    ap = average_precision(curve, cfg.ap_mode) if n_pos else 0.0
    return ClassEval(ap, best_f1, curve, n_pos, len(rows)), tp_pairs


def evaluate(
    dets: Sequence[Detection],
    gts: Sequence[Annotation],
    cfg: EvalConfig | None = None,
) -> EvalReport:
    """Full report: per-class AP and best F1, mAP over classes with
    ground truth, PR curves, and prow accuracy over TP pairs."""
    cfg = cfg or EvalConfig()
    classes = list(cfg.class_names) if cfg.class_names else sorted({g.class_name for g in gts})
    per_class: dict[str, ClassEval] = {}
    all_pairs: list[tuple[Detection, Annotation]] = []
    aps: list[float] = []
    for idx, name in enumerate(classes):
        cls_gts = [g for g in gts if g.class_name == name]
        cls_dets = [d for d in dets if d.class_id == idx]
        ce, pairs = _class_curve(cls_dets, cls_gts, cfg)
        per_class[name] = ce
        all_pairs.extend(pairs)
        if ce.num_gts > 0:
            aps.append(ce.ap)
    mean_ap = sum(aps) / len(aps) if aps else 0.0
    return EvalReport(per_class, mean_ap, prow_accuracy(all_pairs), cfg)


def report_to_dict(report: EvalReport) -> dict:
    """JSON-ready form of an :class:`EvalReport`."""
    return {
        "mAP": report.mean_ap,
        "iou_thresh": report.config.iou_thresh,
        "ap_mode": report.config.ap_mode,
        "classes": {
            name: {
                "ap": ce.ap,
                "best_f1": ce.best_f1,
                "num_gts": ce.num_gts,
                "num_dets": ce.num_dets,
                "curve": [[r, p, s] for r, p, s in ce.curve],
            }
            for name, ce in sorted(report.per_class.items())
        },
        "prow_accuracy": report.prow.overall,
        "prow_bins": list(report.prow.bins),
        "prow_bin_counts": list(report.prow.bin_counts),
    }
