"""Annotation and detection file formats, plus large-scene tiling.

Formats
-------
* DOTA text: optional ``imagesource:`` / ``gsd:`` header lines, then one
  object per line: ``x1 y1 x2 y2 x3 y3 x4 y4 class difficult``.
* SRSS contour JSON-lines: ``{"image", "class", "points", "difficult"?}``
  with ``points[0]`` the prow.
* Annotation JSON-lines (the ``convert`` output):
  ``{image_id, class, difficult, cx, cy, w, h, theta_deg, prow_side?}``.
* Detection JSON-lines:
  ``{image_id, class, score, cx, cy, w, h, theta_deg, prow_side?}``.

Detection and annotation floats are written with 9 fractional digits, so
write -> read is lossless to 1e-9; SRSS points round-trip exactly.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .encoding import prow_side_from_contour
from .errors import DegenerateGeometryError, ParseError
from .geometry import RotatedBox, canonicalize, min_area_rect
from .nms import Detection, RnmsConfig, rnms

DOTA_HEADER_PREFIXES = ("imagesource", "gsd")

_DET_REQUIRED = ("image_id", "class", "score", "cx", "cy", "w", "h", "theta_deg")
_DET_OPTIONAL = ("prow_side",)
_ANN_REQUIRED = ("image_id", "class", "difficult", "cx", "cy", "w", "h", "theta_deg")
_ANN_OPTIONAL = ("prow_side",)
_SRSS_REQUIRED = ("image", "class", "points")
_SRSS_OPTIONAL = ("difficult",)


@dataclass(frozen=True)
class Annotation:
    """Ground-truth record with its derived canonical box.

    ``points`` keeps the source contour (prow first) when the record
    came from contour geometry.
    """

    image_id: str
    class_name: str
    box: RotatedBox
    difficult: bool = False
    prow: int | None = None
    points: tuple[tuple[float, float], ...] | None = None


@dataclass(frozen=True)
class TilePlan:
    """Deterministic decomposition of a scene into overlapping tiles."""

    scene_w: float
    scene_h: float
    tile: float
    overlap: float
    origins: tuple[tuple[float, float], ...]

    @property
    def stride(self) -> float:
        return self.tile * (1.0 - self.overlap)

    def to_dict(self) -> dict:
        return {
            "scene_w": self.scene_w,
            "scene_h": self.scene_h,
            "tile": self.tile,
            "overlap": self.overlap,
            "origins": [[ox, oy] for ox, oy in self.origins],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TilePlan":
        return cls(
            scene_w=float(d["scene_w"]),
            scene_h=float(d["scene_h"]),
            tile=float(d["tile"]),
            overlap=float(d["overlap"]),
            origins=tuple((float(ox), float(oy)) for ox, oy in d["origins"]),
        )


# ---------------------------------------------------------------------------
# annotation parsing


def parse_dota(text: str, image_id: str = "") -> list[Annotation]:
    """Parse DOTA-format annotation text."""
    out: list[Annotation] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        head = line.split(":", 1)[0].strip().lower()
        if head in DOTA_HEADER_PREFIXES:
            continue
        tokens = line.split()
        if len(tokens) != 10:
            raise ParseError(f"expected 10 tokens, got {len(tokens)}", line=lineno)
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError as exc:
            raise ParseError(f"non-numeric coordinate in {tokens[:8]}", line=lineno) from exc
        try:
            difficult = bool(int(tokens[9]))
        except ValueError as exc:
            raise ParseError(f"difficulty flag must be an integer, got {tokens[9]!r}", line=lineno) from exc
        quad = list(zip(coords[0::2], coords[1::2]))
        try:
            box = min_area_rect(quad)
        except DegenerateGeometryError as exc:
            raise ParseError(f"degenerate quadrilateral: {exc}", line=lineno) from exc
        out.append(Annotation(image_id=image_id, class_name=tokens[8], box=box, difficult=difficult))
    return out


def parse_srss_contour(record: dict, line: int | None = None) -> Annotation:
    """Build an annotation from one SRSS contour record."""
    for key in record:
        if key not in _SRSS_REQUIRED + _SRSS_OPTIONAL:
            raise ParseError(f"unknown field {key!r}", line=line)
    for key in _SRSS_REQUIRED:
        if key not in record:
            raise ParseError(f"missing field {key!r}", line=line)
    points = record["points"]
    if not isinstance(points, list) or len(points) < 3:
        raise ParseError(f"contour needs at least 3 points, got {points!r}", line=line)
    try:
        contour = tuple((float(x), float(y)) for x, y in points)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed contour point in {points!r}", line=line) from exc
    try:
        box, side = prow_side_from_contour(contour)
    except DegenerateGeometryError as exc:
        raise ParseError(f"degenerate contour: {exc}", line=line) from exc
    return Annotation(
        image_id=str(record["image"]),
        class_name=str(record["class"]),
        box=box,
        difficult=bool(record.get("difficult", 0)),
        prow=side,
        points=contour,
    )


def parse_srss(text: str) -> list[Annotation]:
    """Parse SRSS contour JSON-lines text."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
        out.append(parse_srss_contour(record, line=lineno))
    return out


def format_srss_record(ann: Annotation) -> str:
    """One SRSS JSON line; exact floats so write -> parse round-trips."""
    if ann.points is None:
        raise ValueError("SRSS records need contour points")
    rec = {
        "image": ann.image_id,
        "class": ann.class_name,
        "points": [[x, y] for x, y in ann.points],
        "difficult": int(ann.difficult),
    }
    return json.dumps(rec, sort_keys=True)


# ---------------------------------------------------------------------------
# annotation / detection JSON-lines


def _round9(v: float) -> float:
    return round(float(v), 9)


def _read_lines(source) -> Iterable[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    elif isinstance(source, io.TextIOBase):
        text = source.read()
    else:
        text = str(source)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            yield lineno, line


def _parse_json_line(line: str, lineno: int) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
    if not isinstance(rec, dict):
        raise ParseError(f"expected a JSON object, got {type(rec).__name__}", line=lineno)
    return rec


def _check_fields(rec: dict, required, optional, lineno: int) -> None:
    for key in rec:
        if key not in required and key not in optional:
            raise ParseError(f"unknown field {key!r}", line=lineno)
    for key in required:
        if key not in rec:
            raise ParseError(f"missing field {key!r}", line=lineno)


def _class_id(value, class_names: Sequence[str] | None, lineno: int) -> int:
    if isinstance(value, bool):
        raise ParseError(f"class must be an integer or name, got {value!r}", line=lineno)
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        if class_names is not None:
            try:
                return list(class_names).index(value)
            except ValueError:
                raise ParseError(f"class {value!r} not in class list {list(class_names)}", line=lineno) from None
        if value.lstrip("-").isdigit():
            return int(value)
        raise ParseError(f"string class {value!r} needs a class-name list", line=lineno)
    raise ParseError(f"class must be an integer or name, got {value!r}", line=lineno)


def _box_from_record(rec: dict, lineno: int) -> RotatedBox:
    try:
        return canonicalize(
            RotatedBox(
                float(rec["cx"]), float(rec["cy"]), float(rec["w"]), float(rec["h"]), float(rec["theta_deg"])
            )
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(f"non-numeric box field: {exc}", line=lineno) from exc


def detection_to_record(det: Detection, class_names: Sequence[str] | None = None) -> dict:
    rec = {
        "image_id": det.image_id,
        "class": class_names[det.class_id] if class_names is not None else det.class_id,
        "score": _round9(det.score),
        "cx": _round9(det.box.cx),
        "cy": _round9(det.box.cy),
        "w": _round9(det.box.w),
        "h": _round9(det.box.h),
        "theta_deg": _round9(det.box.theta),
    }
    if det.prow is not None:
        rec["prow_side"] = det.prow
    return rec


def read_detections_with_classes(
    source, class_names: Sequence[str] | None = None
) -> tuple[list[Detection], list[str] | None]:
    """Read detection JSON-lines.

    With no class list, string class names are mapped to ids by sorted
    order of the names seen; the list used is returned so a later write
    can restore the names.
    """
    records = []
    names_seen: set[str] = set()
    for lineno, line in _read_lines(source):
        rec = _parse_json_line(line, lineno)
        _check_fields(rec, _DET_REQUIRED, _DET_OPTIONAL, lineno)
        if class_names is None and isinstance(rec["class"], str) and not rec["class"].lstrip("-").isdigit():
            names_seen.add(rec["class"])
        records.append((lineno, rec))
    used = list(class_names) if class_names is not None else (sorted(names_seen) or None)

    dets = []
    for lineno, rec in records:
        prow = rec.get("prow_side")
        if prow is not None and prow not in (0, 1, 2, 3):
            raise ParseError(f"prow_side must be in 0..3, got {prow!r}", line=lineno)
        try:
            score = float(rec["score"])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"non-numeric score {rec['score']!r}", line=lineno) from exc
        dets.append(
            Detection(
                box=_box_from_record(rec, lineno),
                score=score,
                class_id=_class_id(rec["class"], used, lineno),
                prow=prow,
                image_id=str(rec["image_id"]),
            )
        )
    return dets, used


def read_detections(source, class_names: Sequence[str] | None = None) -> list[Detection]:
    return read_detections_with_classes(source, class_names)[0]


def write_detections(dets: Sequence[Detection], target, class_names: Sequence[str] | None = None) -> None:
    lines = [json.dumps(detection_to_record(d, class_names), sort_keys=True) for d in dets]
    text = "".join(line + "\n" for line in lines)
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    else:
        target.write(text)


def annotation_to_record(ann: Annotation) -> dict:
    rec = {
        "image_id": ann.image_id,
        "class": ann.class_name,
        "difficult": int(ann.difficult),
        "cx": _round9(ann.box.cx),
        "cy": _round9(ann.box.cy),
        "w": _round9(ann.box.w),
        "h": _round9(ann.box.h),
        "theta_deg": _round9(ann.box.theta),
    }
    if ann.prow is not None:
        rec["prow_side"] = ann.prow
    return rec


def read_annotations(source) -> list[Annotation]:
    """Read annotation JSON-lines (the ``convert`` output format)."""
    out = []
    for lineno, line in _read_lines(source):
        rec = _parse_json_line(line, lineno)
        _check_fields(rec, _ANN_REQUIRED, _ANN_OPTIONAL, lineno)
        prow = rec.get("prow_side")
        if prow is not None and prow not in (0, 1, 2, 3):
            raise ParseError(f"prow_side must be in 0..3, got {prow!r}", line=lineno)
        out.append(
            Annotation(
                image_id=str(rec["image_id"]),
                class_name=str(rec["class"]),
                box=_box_from_record(rec, lineno),
                difficult=bool(rec["difficult"]),
                prow=prow,
            )
        )
    return out


def write_annotations(anns: Sequence[Annotation], target) -> None:
    lines = [json.dumps(annotation_to_record(a), sort_keys=True) for a in anns]
    text = "".join(line + "\n" for line in lines)
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    else:
        target.write(text)


# ---------------------------------------------------------------------------
# tiling


def _axis_origins(dim: float, tile: float, stride: float) -> list[float]:
    origins = [0.0]
    x = stride
    while x + tile < dim:
        origins.append(x)
        x += stride
    last = max(dim - tile, 0.0)
    if last > origins[-1] + 1e-9:
        origins.append(last)
    return origins


def plan_tiles(scene_w: float, scene_h: float, tile: float = 1000.0, overlap: float = 0.4) -> TilePlan:
    """Tile origins covering a scene; the last tile per axis is clamped
    to the scene boundary and duplicate clamps are dropped."""
    if tile <= 0:
        raise ValueError(f"tile size must be positive, got {tile}")
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    if scene_w <= 0 or scene_h <= 0:
        raise ValueError(f"scene dims must be positive, got {scene_w} x {scene_h}")
    stride = tile * (1.0 - overlap)
    xs = _axis_origins(scene_w, tile, stride)
    ys = _axis_origins(scene_h, tile, stride)
    origins = tuple((ox, oy) for oy in ys for ox in xs)
    return TilePlan(scene_w, scene_h, tile, overlap, origins)


def _owner_origin(c: float, origins: Sequence[float], tile: float) -> float | None:
    # lowest containing origin; intervals are closed so a center on a
    # shared boundary goes to the lower tile
    for o in origins:
        if o <= c <= o + tile:
            return o
    return None


def partition_annotations(annotations: Sequence[Annotation], plan: TilePlan) -> list[list[Annotation]]:
    """Assign each annotation to exactly one owning tile, shifted into
    tile-local coordinates. Boxes reaching past tile edges stay unclipped."""
    xs = sorted({ox for ox, _ in plan.origins})
    ys = sorted({oy for _, oy in plan.origins})
    index = {origin: i for i, origin in enumerate(plan.origins)}
    out: list[list[Annotation]] = [[] for _ in plan.origins]
    for ann in annotations:
        ox = _owner_origin(ann.box.cx, xs, plan.tile)
        oy = _owner_origin(ann.box.cy, ys, plan.tile)
        if ox is None or oy is None:
            continue  # center outside the scene
        shifted_box = replace(ann.box, cx=ann.box.cx - ox, cy=ann.box.cy - oy)
        shifted_pts = (
            tuple((x - ox, y - oy) for x, y in ann.points) if ann.points is not None else None
        )
        out[index[(ox, oy)]].append(replace(ann, box=shifted_box, points=shifted_pts))
    return out


def assign_to_tile(annotations: Sequence[Annotation], plan: TilePlan, tile_index: int) -> list[Annotation]:
    """Annotations owned by one tile of the plan, in tile-local coordinates."""
    return partition_annotations(annotations, plan)[tile_index]


def merge_tiles(
    per_tile: Sequence[Sequence[Detection]],
    plan: TilePlan,
    nms_cfg: RnmsConfig | None = None,
    scene_id: str | None = None,
) -> list[Detection]:
    """Shift tile-frame detections to the scene frame and deduplicate.

    Rotational NMS runs per class over the whole scene; the output is
    sorted by descending score.
    """
    if len(per_tile) != len(plan.origins):
        raise ValueError(f"expected {len(plan.origins)} tile groups, got {len(per_tile)}")
    nms_cfg = nms_cfg or RnmsConfig()
    shifted: list[Detection] = []
    for (ox, oy), dets in zip(plan.origins, per_tile):
        for d in dets:
            box = replace(d.box, cx=d.box.cx + ox, cy=d.box.cy + oy)
            shifted.append(replace(d, box=box, image_id=scene_id if scene_id is not None else d.image_id))
    merged: list[Detection] = []
    for class_id in sorted({d.class_id for d in shifted}):
        group = [d for d in shifted if d.class_id == class_id]
        merged.extend(rnms(group, nms_cfg))
    merged.sort(key=lambda d: (-d.score, d.class_id, d.box.cx, d.box.cy, d.box.w, d.box.h, d.box.theta))
    return merged
