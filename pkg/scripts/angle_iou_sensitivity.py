#!/usr/bin/env python3
"""How fast skew IoU decays with angle difference, by aspect ratio.

Two same-center boxes of unit area are rotated apart; long thin boxes
lose overlap much faster than square ones, which is what motivates an
angle-aware suppression rule. The 7:1 row at 15 degrees sits near 0.38.
"""

import argparse
import csv
import math
import sys

from shipdet.geometry import RotatedBox, skew_iou


def iou_at(aspect: float, diff_deg: float, length: float = 7.0) -> float:
    w = length
    h = length / aspect
    a = RotatedBox(0, 0, w, h, -45.0)
    b = RotatedBox(0, 0, w, h, -45.0 - diff_deg) if diff_deg < 45 else RotatedBox(0, 0, w, h, -45.0 + diff_deg)
    return skew_iou(a, b)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--aspects", type=float, nargs="+", default=[1, 2, 3, 5, 7])
    ap.add_argument("--max-diff", type=float, default=45.0)
    ap.add_argument("--step", type=float, default=5.0)
    ap.add_argument("--csv", help="also write the table as CSV")
    args = ap.parse_args()

    diffs = [round(d * args.step, 6) for d in range(int(args.max_diff / args.step) + 1)]
    header = ["diff_deg"] + [f"1:{a:g}" for a in args.aspects]
    rows = []
    for d in diffs:
        rows.append([d] + [iou_at(a, d) for a in args.aspects])

    widths = [9] + [8] * len(args.aspects)
    print("  ".join(f"{h:>{w}}" for h, w in zip(header, widths)))
    for row in rows:
        cells = [f"{row[0]:>9.1f}"] + [f"{v:>8.4f}" for v in row[1:]]
        print("  ".join(cells))

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        print(f"\nwrote {args.csv}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
