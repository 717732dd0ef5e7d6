"""Batch command-line front end.

Subcommands: iou, anchors, nms, tile, convert, eval. All records are
JSON-lines; diagnostics go to stderr. Exit codes: 0 success, 1 usage
error, 2 data error.

For ``tile --merge`` the per-tile detection files use
``image_id = "<scene>__<tile_index>"`` with the index into the plan's
origin list.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .anchors import default_levels, generate_anchors, grid_size_for_image
from .dataset_io import (
    TilePlan,
    annotation_to_record,
    detection_to_record,
    merge_tiles,
    parse_dota,
    parse_srss,
    plan_tiles,
    read_annotations,
    read_detections_with_classes,
    write_annotations,
    write_detections,
)
from .errors import ShipdetError
from .evaluation import EvalConfig, evaluate, report_to_dict
from .geometry import bounding_hbox, horizontal_iou, parse_box_literal, skew_iou
from .nms import RnmsConfig, hnms, rnms, soft_nms

USAGE_ERROR = 1
DATA_ERROR = 2


class _CliExit(SystemExit):
    def __init__(self, message, code):
        print(message, file=sys.stderr)
        super().__init__(code)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _CliExit(f"{self.prog}: error: {message}", USAGE_ERROR)


def _out_stream(path: str | None):
    return open(path, "w") if path else sys.stdout


def _emit(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="shipdet", description=__doc__)
    p.add_argument("--version", action="version", version=f"shipdet {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("iou", help="skew and horizontal IoU of two box literals")
    sp.add_argument("--a", required=True, metavar="CX,CY,W,H,THETA")
    sp.add_argument("--b", required=True, metavar="CX,CY,W,H,THETA")
    sp.add_argument("--output")

    sp = sub.add_parser("anchors", help="dump one pyramid level's anchors as JSON lines")
    sp.add_argument("--level", required=True, choices=sorted(default_levels()))
    sp.add_argument("--grid-h", type=int)
    sp.add_argument("--grid-w", type=int)
    sp.add_argument("--image-w", type=int)
    sp.add_argument("--image-h", type=int)
    sp.add_argument("--output")

    sp = sub.add_parser("nms", help="filter a detection file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--output")
    sp.add_argument("--mode", choices=("rnms", "hnms", "soft"), default="rnms")
    sp.add_argument("--iou-hi", type=float, default=0.7)
    sp.add_argument("--band", type=float, nargs=2, default=(0.3, 0.7), metavar=("LO", "HI"))
    sp.add_argument("--angle", type=float, default=15.0)
    sp.add_argument("--invert-band-rule", action="store_true")
    sp.add_argument("--sigma", type=float, default=0.5)
    sp.add_argument("--score-thresh", type=float, default=1e-3)

    sp = sub.add_parser("tile", help="emit a tile plan, or merge per-tile detections")
    sp.add_argument("--width", type=float)
    sp.add_argument("--height", type=float)
    sp.add_argument("--tile", type=float, default=1000.0)
    sp.add_argument("--overlap", type=float, default=0.4)
    sp.add_argument("--merge", action="store_true")
    sp.add_argument("--plan", help="plan JSON (for --merge)")
    sp.add_argument("--input", help="tile-frame detections (for --merge)")
    sp.add_argument("--scene-id", default="scene")
    sp.add_argument("--iou-hi", type=float, default=0.7)
    sp.add_argument("--band", type=float, nargs=2, default=(0.3, 0.7), metavar=("LO", "HI"))
    sp.add_argument("--angle", type=float, default=15.0)
    sp.add_argument("--output")

    sp = sub.add_parser("convert", help="convert DOTA/SRSS ground truth to annotation JSON lines")
    sp.add_argument("--format", required=True, choices=("dota", "srss"))
    sp.add_argument("--input", required=True)
    sp.add_argument("--image-id", help="image id for DOTA input (default: file stem)")
    sp.add_argument("--output")

    sp = sub.add_parser("eval", help="evaluate detections against annotations")
    sp.add_argument("--dets", required=True)
    sp.add_argument("--gts", required=True)
    sp.add_argument("--iou", type=float, default=0.5)
    sp.add_argument("--ap-mode", choices=("all-point", "11-point"), default="all-point")
    sp.add_argument("--classes", help="comma-separated class list (default: classes in --gts)")
    sp.add_argument("--pr-csv", help="also write PR-curve points as CSV")
    sp.add_argument("--output")
    return p


def _rnms_config(args) -> RnmsConfig:
    try:
        return RnmsConfig(
            iou_hi=args.iou_hi,
            band_lo=args.band[0],
            band_hi=args.band[1],
            angle_thresh_deg=args.angle,
            invert_band_rule=getattr(args, "invert_band_rule", False),
        )
    except ValueError as exc:
        raise _CliExit(f"{args.command}: {exc}", USAGE_ERROR) from exc


def _cmd_iou(args) -> int:
    a = parse_box_literal(args.a)
    b = parse_box_literal(args.b)
    out = {
        "skew_iou": skew_iou(a, b),
        "horizontal_iou": horizontal_iou(bounding_hbox(a), bounding_hbox(b)),
    }
    _emit(args.output, json.dumps(out, sort_keys=True) + "\n")
    return 0


def _cmd_anchors(args) -> int:
    level = default_levels()[args.level]
    if args.grid_h and args.grid_w:
        gh, gw = args.grid_h, args.grid_w
    elif args.image_w and args.image_h:
        gh, gw = grid_size_for_image(level, args.image_w, args.image_h)
    else:
        raise _CliExit(
            "anchors: need --grid-h/--grid-w or --image-w/--image-h", USAGE_ERROR
        )
    stream = _out_stream(args.output)
    try:
        for a in generate_anchors(level, gh, gw):
            rec = {
                "cx": a.cx,
                "cy": a.cy,
                "w": round(a.w, 9),
                "h": round(a.h, 9),
                "theta_deg": a.theta,
                "level": level.name,
            }
            stream.write(json.dumps(rec, sort_keys=True) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
    return 0


def _cmd_nms(args) -> int:
    cfg = _rnms_config(args)  # validate flags before touching files
    dets, class_names = read_detections_with_classes(args.input)
    groups = sorted({(d.image_id, d.class_id) for d in dets})
    kept = []
    for image_id, class_id in groups:
        group = [d for d in dets if (d.image_id, d.class_id) == (image_id, class_id)]
        if args.mode == "rnms":
            kept.extend(rnms(group, cfg))
        elif args.mode == "hnms":
            kept.extend(hnms(group, args.iou_hi))
        else:
            kept.extend(soft_nms(group, args.sigma, args.score_thresh))
    stream = _out_stream(args.output)
    try:
        for d in kept:
            stream.write(json.dumps(detection_to_record(d, class_names), sort_keys=True) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
    return 0


def _split_tile_id(image_id: str, n_tiles: int) -> tuple[str, int]:
    scene, sep, idx = image_id.rpartition("__")
    if not sep or not idx.isdigit() or not 0 <= int(idx) < n_tiles:
        raise ShipdetError(
            f"image_id {image_id!r} must look like '<scene>__<tile_index>' with index < {n_tiles}"
        )
    return scene, int(idx)


def _cmd_tile(args) -> int:
    if args.merge:
        if not args.plan or not args.input:
            raise _CliExit("tile --merge needs --plan and --input", USAGE_ERROR)
        cfg = _rnms_config(args)  # validate flags before touching files
        plan = TilePlan.from_dict(json.loads(Path(args.plan).read_text()))
        dets, class_names = read_detections_with_classes(args.input)
        per_tile: list[list] = [[] for _ in plan.origins]
        for d in dets:
            _, idx = _split_tile_id(d.image_id, len(plan.origins))
            per_tile[idx].append(d)
        merged = merge_tiles(per_tile, plan, cfg, scene_id=args.scene_id)
        stream = _out_stream(args.output)
        try:
            for d in merged:
                stream.write(json.dumps(detection_to_record(d, class_names), sort_keys=True) + "\n")
        finally:
            if stream is not sys.stdout:
                stream.close()
        return 0
    if args.width is None or args.height is None:
        raise _CliExit("tile needs --width and --height (or --merge)", USAGE_ERROR)
    try:
        plan = plan_tiles(args.width, args.height, args.tile, args.overlap)
    except ValueError as exc:
        raise _CliExit(f"tile: {exc}", USAGE_ERROR) from exc
    _emit(args.output, json.dumps(plan.to_dict(), sort_keys=True) + "\n")
    return 0


def _cmd_convert(args) -> int:
    text = Path(args.input).read_text()
    if args.format == "dota":
        image_id = args.image_id or Path(args.input).stem
        anns = parse_dota(text, image_id=image_id)
    else:
        anns = parse_srss(text)
    stream = _out_stream(args.output)
    try:
        for a in anns:
            stream.write(json.dumps(annotation_to_record(a), sort_keys=True) + "\n")
    finally:
        if stream is not sys.stdout:
            stream.close()
    return 0


def _cmd_eval(args) -> int:
    gts = read_annotations(args.gts)
    classes = (
        tuple(args.classes.split(",")) if args.classes else tuple(sorted({g.class_name for g in gts}))
    )
    dets, _ = read_detections_with_classes(args.dets, class_names=classes)
    try:
        cfg = EvalConfig(iou_thresh=args.iou, ap_mode=args.ap_mode, class_names=classes)
    except ValueError as exc:
        raise _CliExit(f"eval: {exc}", USAGE_ERROR) from exc
    report = evaluate(dets, gts, cfg)
    if args.pr_csv:
        lines = ["class,recall,precision,score"]
        for name in sorted(report.per_class):
            for r, p, s in report.per_class[name].curve:
                lines.append(f"{name},{r!r},{p!r},{s!r}")
        Path(args.pr_csv).write_text("\n".join(lines) + "\n")
    _emit(args.output, json.dumps(report_to_dict(report), sort_keys=True) + "\n")
    return 0


_COMMANDS = {
    "iou": _cmd_iou,
    "anchors": _cmd_anchors,
    "nms": _cmd_nms,
    "tile": _cmd_tile,
    "convert": _cmd_convert,
    "eval": _cmd_eval,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ShipdetError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"shipdet {args.command}: {exc}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
