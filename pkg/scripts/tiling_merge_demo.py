#!/usr/bin/env python3
"""End-to-end tiling demo on a synthetic large scene.

Plants ships in a big scene, lets every overlapping tile "detect" the
ships it covers (with jitter, score noise, and a few false alarms),
merges the tile detections back with rotational NMS, and scores the
result against the planted truth.
"""

import argparse
import math
import sys

import numpy as np

from shipdet.dataset_io import Annotation, merge_tiles, plan_tiles
from shipdet.evaluation import EvalConfig, evaluate
from shipdet.geometry import RotatedBox, canonicalize
from shipdet.nms import Detection, RnmsConfig


def plant_ships(rng, n, scene, min_sep=400.0):
    ships = []
    while len(ships) < n:
        cand = canonicalize(
            RotatedBox(
                cx=float(rng.uniform(100, scene - 100)),
                cy=float(rng.uniform(100, scene - 100)),
                w=float(rng.uniform(30, 150)),
                h=float(rng.uniform(10, 40)),
                theta=float(rng.uniform(-360, 360)),
            )
        )
        if all(math.hypot(cand.cx - s.cx, cand.cy - s.cy) > min_sep for s in ships):
            ships.append(cand)
    return ships


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scene", type=float, default=10_000.0)
    ap.add_argument("--ships", type=int, default=50)
    ap.add_argument("--tile", type=float, default=1000.0)
    ap.add_argument("--overlap", type=float, default=0.4)
    ap.add_argument("--false-alarms", type=int, default=10)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    plan = plan_tiles(args.scene, args.scene, args.tile, args.overlap)
    ships = plant_ships(rng, args.ships, args.scene)
    print(f"scene {args.scene:g}^2, {len(plan.origins)} tiles at stride {plan.stride:g}, {len(ships)} ships")

    per_tile = []
    raw = 0
    for ox, oy in plan.origins:
        dets = []
        for s in ships:
            if ox <= s.cx <= ox + plan.tile and oy <= s.cy <= oy + plan.tile:
                jittered = RotatedBox(
                    s.cx - ox + float(rng.normal(0, 0.5)),
                    s.cy - oy + float(rng.normal(0, 0.5)),
                    s.w,
                    s.h,
                    s.theta,
                )
                dets.append(Detection(box=jittered, score=float(rng.uniform(0.7, 1.0)), image_id="t"))
        raw += len(dets)
        per_tile.append(dets)
    # sprinkle low-score false alarms on random tiles
    for _ in range(args.false_alarms):
        i = int(rng.integers(0, len(per_tile)))
        fa = canonicalize(
            RotatedBox(float(rng.uniform(0, plan.tile)), float(rng.uniform(0, plan.tile)),
                       float(rng.uniform(20, 60)), float(rng.uniform(8, 20)), float(rng.uniform(-90, 0)))
        )
        per_tile[i] = list(per_tile[i]) + [Detection(box=fa, score=float(rng.uniform(0.1, 0.4)), image_id="t")]
        raw += 1

    merged = merge_tiles(per_tile, plan, RnmsConfig(), scene_id="scene")
    print(f"{raw} tile detections merged down to {len(merged)}")

    gts = [Annotation(image_id="scene", class_name="ship", box=s) for s in ships]
    report = evaluate(merged, gts, EvalConfig(iou_thresh=0.5))
    ce = report.per_class["ship"]
    print(f"AP {ce.ap:.4f}  best F1 {ce.best_f1:.4f}  ({ce.num_dets} dets / {ce.num_gts} gts)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
