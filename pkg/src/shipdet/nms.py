"""Non-maximum suppression over rotated detections.

The rotational variant suppresses a lower-scored detection against a
kept one when either (a) their skew IoU reaches ``iou_hi``, or (b) the
IoU falls in [band_lo, band_hi] while the 90-degree-circular angle
difference exceeds ``angle_thresh_deg``. Constraint (b) can be inverted
for experimentation (suppress parallel pairs instead), which is not a
claim about any trained system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import RotatedBox, bounding_hbox, horizontal_iou, skew_iou


@dataclass(frozen=True, slots=True)
class Detection:
    """A scored, classed rotated box; the unit of NMS and evaluation."""

    box: RotatedBox
    score: float
    class_id: int = 0
    prow: int | None = None
    image_id: str = ""


@dataclass(frozen=True)
class RnmsConfig:
    iou_hi: float = 0.7
    band_lo: float = 0.3
    band_hi: float = 0.7
    angle_thresh_deg: float = 15.0
    invert_band_rule: bool = False

    def __post_init__(self):
        if not 0.0 <= self.band_lo <= self.band_hi <= 1.0:
            raise ValueError(f"need 0 <= band_lo <= band_hi <= 1, got {self}")
        if not 0.0 <= self.iou_hi <= 1.0:
            raise ValueError(f"iou_hi must be in [0, 1], got {self.iou_hi}")
        if not 0.0 < self.angle_thresh_deg < 90.0:
            raise ValueError(f"angle_thresh_deg must be in (0, 90), got {self.angle_thresh_deg}")


def angle_diff_deg(a: float, b: float) -> float:
    """Circular angle difference with period 90 (rectangle symmetry)."""
    d = abs(a - b) % 90.0
    return min(d, 90.0 - d)


def _sort_key(d: Detection):
    # equal scores break toward the lexicographically smaller box
    return (-d.score, d.box.cx, d.box.cy, d.box.w, d.box.h, d.box.theta)


def _check_one_group(dets: list[Detection]) -> None:
    if not dets:
        return
    ids = {(d.image_id, d.class_id) for d in dets}
    if len(ids) > 1:
        raise ValueError(f"detections span several (image, class) groups: {sorted(ids)}")


def _suppresses(kept: Detection, cand: Detection, cfg: RnmsConfig) -> bool:
    iou = skew_iou(kept.box, cand.box)
    if iou >= cfg.iou_hi:
        return True
    if cfg.band_lo <= iou <= cfg.band_hi:
        divergent = angle_diff_deg(kept.box.theta, cand.box.theta) > cfg.angle_thresh_deg
        return not divergent if cfg.invert_band_rule else divergent
    return False


def rnms(dets: list[Detection], cfg: RnmsConfig | None = None) -> list[Detection]:
    """Greedy rotational NMS; input must be one (image, class) group.

    Output keeps descending score order and is deterministic under the
    documented tie-break.
    """
    cfg = cfg or RnmsConfig()
    _check_one_group(dets)
    kept: list[Detection] = []
    for cand in sorted(dets, key=_sort_key):
        if not any(_suppresses(k, cand, cfg) for k in kept):
            kept.append(cand)
    return kept


def hnms(dets: list[Detection], iou_thresh: float = 0.7) -> list[Detection]:
    """Classic greedy NMS on the axis-aligned bounding boxes."""
    _check_one_group(dets)
    kept: list[Detection] = []
    hboxes: list = []
    for cand in sorted(dets, key=_sort_key):
        hb = bounding_hbox(cand.box)
        if not any(horizontal_iou(kb, hb) >= iou_thresh for kb in hboxes):
            kept.append(cand)
            hboxes.append(hb)
    return kept


def soft_nms(dets: list[Detection], sigma: float = 0.5, score_thresh: float = 1e-3) -> list[Detection]:
    """Gaussian Soft-NMS: neighbors are rescored by exp(-iou^2 / sigma)
    instead of removed; only scores below ``score_thresh`` drop out."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    _check_one_group(dets)
    pool = sorted(dets, key=_sort_key)
    out: list[Detection] = []
    while pool:
        best = min(range(len(pool)), key=lambda i: _sort_key(pool[i]))
        top = pool.pop(best)
        if top.score < score_thresh:
            continue
        out.append(top)
        rescored = []
        for d in pool:
            decay = math.exp(-skew_iou(top.box, d.box) ** 2 / sigma)
            nd = replace(d, score=d.score * decay)
            if nd.score >= score_thresh:
                rescored.append(nd)
        pool = rescored
    return out
