"""Box regression targets and prow-side labeling.

A prow side is an integer in {0, 1, 2, 3} indexing the box edge from
corner i to corner (i + 1) % 4 of :func:`shipdet.geometry.to_corners`
output. The side survives re-parameterization as a physical edge via
:func:`remap_prow_side`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateGeometryError, OutOfRangeError
from .geometry import HorizontalBox, Point, RotatedBox, canonicalize, min_area_rect, to_corners

ProwSide = int

# Decoded sides larger than this indicate a runaway log-space target.
MAX_DECODED_SIDE = 1e6


@dataclass(frozen=True, slots=True)
class RegressionTarget:
    """Parameterized box offsets: unitless centers, log-ratio sizes,
    and (for the rotational variant) an angle delta in radians."""

    tx: float
    ty: float
    tw: float
    th: float
    ttheta: float | None = None


def encode(gt: RotatedBox, anchor: RotatedBox) -> RegressionTarget:
    """Offsets that carry ``anchor`` onto ``gt``.

    Both boxes are canonicalized first, so the angle delta always
    satisfies |ttheta| < pi/2 and no extra quarter-turn term is needed.
    """
    gt = canonicalize(gt)
    anchor = canonicalize(anchor)
    ttheta = math.radians(gt.theta - anchor.theta)
    # Canonical angles keep the difference inside (-90, 90) exactly, but
    # IEEE rounding can land on the boundary (e.g. -90 vs -1e-300 deg);
    # nudge back so |ttheta| < pi/2 holds unconditionally.
    if abs(ttheta) >= math.pi / 2:
        ttheta = math.copysign(math.nextafter(math.pi / 2, 0.0), ttheta)
    return RegressionTarget(
        tx=(gt.cx - anchor.cx) / anchor.w,
        ty=(gt.cy - anchor.cy) / anchor.h,
        tw=math.log(gt.w / anchor.w),
        th=math.log(gt.h / anchor.h),
        ttheta=ttheta,
    )


def decode(anchor: RotatedBox, t: RegressionTarget) -> RotatedBox:
    """Inverse of :func:`encode`, canonicalized."""
    if t.ttheta is None:
        raise ValueError("rotational decode needs a 5-field target; use decode_h")
    anchor = canonicalize(anchor)
    try:
        w = anchor.w * math.exp(t.tw)
        h = anchor.h * math.exp(t.th)
    except OverflowError as exc:
        raise OutOfRangeError(f"decoded size overflows: {t}") from exc
    if w > MAX_DECODED_SIDE or h > MAX_DECODED_SIDE:
        raise OutOfRangeError(f"decoded side exceeds {MAX_DECODED_SIDE:g} px: {t}")
    return canonicalize(
        RotatedBox(
            cx=anchor.cx + t.tx * anchor.w,
            cy=anchor.cy + t.ty * anchor.h,
            w=w,
            h=h,
            theta=anchor.theta + math.degrees(t.ttheta),
        )
    )


def _hbox_center_size(b: HorizontalBox) -> tuple[float, float, float, float]:
    return (b.xmin + b.xmax) / 2.0, (b.ymin + b.ymax) / 2.0, b.width, b.height


def encode_h(gt: HorizontalBox, anchor: HorizontalBox) -> RegressionTarget:
    """Horizontal-branch variant of :func:`encode` (no angle term)."""
    gx, gy, gw, gh = _hbox_center_size(gt)
    ax, ay, aw, ah = _hbox_center_size(anchor)
    return RegressionTarget(
        tx=(gx - ax) / aw, ty=(gy - ay) / ah, tw=math.log(gw / aw), th=math.log(gh / ah)
    )


def decode_h(anchor: HorizontalBox, t: RegressionTarget) -> HorizontalBox:
    ax, ay, aw, ah = _hbox_center_size(anchor)
    try:
        w = aw * math.exp(t.tw)
        h = ah * math.exp(t.th)
    except OverflowError as exc:
        raise OutOfRangeError(f"decoded size overflows: {t}") from exc
    if w > MAX_DECODED_SIDE or h > MAX_DECODED_SIDE:
        raise OutOfRangeError(f"decoded side exceeds {MAX_DECODED_SIDE:g} px: {t}")
    cx = ax + t.tx * aw
    cy = ay + t.ty * ah
    return HorizontalBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)


def _point_segment_distance(p: Point, a: Point, b: Point) -> float:
    abx, aby = b[0] - a[0], b[1] - a[1]
    apx, apy = p[0] - a[0], p[1] - a[1]
    denom = abx * abx + aby * aby
    t = 0.0 if denom == 0.0 else max(0.0, min(1.0, (apx * abx + apy * aby) / denom))
    return math.hypot(apx - t * abx, apy - t * aby)


def prow_side_from_contour(contour) -> tuple[RotatedBox, ProwSide]:
    """Enclosing box plus the side nearest the first contour point.

    The first point is the prow. Ties (prow at a corner) break toward
    the smaller edge index.
    """
    pts = [(float(x), float(y)) for x, y in contour]
    if len(pts) < 3:
        raise DegenerateGeometryError(f"contour needs at least 3 points, got {len(pts)}")
    box = min_area_rect(pts)
    corners = to_corners(box)
    prow = pts[0]
    best_side, best_dist = 0, math.inf
    for i in range(4):
        d = _point_segment_distance(prow, corners[i], corners[(i + 1) % 4])
        if d < best_dist:
            best_side, best_dist = i, d
    return box, best_side


def remap_prow_side(side: ProwSide, k: int) -> ProwSide:
    """Carry a side label through a canonicalization with wrap count k.

    Corner i of the pre-wrap parameterization lands on corner (i + k) of
    the canonical one, so the physical edge keeps its midpoint.
    """
    if side not in (0, 1, 2, 3):
        raise ValueError(f"prow side must be in 0..3, got {side}")
    return (side + k) % 4


def prow_vector(box: RotatedBox, side: ProwSide) -> Point:
    """Unit outward normal of the labeled edge."""
    if side not in (0, 1, 2, 3):
        raise ValueError(f"prow side must be in 0..3, got {side}")
    corners = to_corners(box)
    a = corners[side]
    b = corners[(side + 1) % 4]
    dx, dy = b[0] - a[0], b[1] - a[1]
    norm = math.hypot(dx, dy)
    return (dy / norm, -dx / norm)
