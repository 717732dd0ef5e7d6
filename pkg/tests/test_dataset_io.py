import io
import json
import math

import pytest

from shipdet.dataset_io import (
    Annotation,
    TilePlan,
    assign_to_tile,
    format_srss_record,
    merge_tiles,
    parse_dota,
    parse_srss,
    parse_srss_contour,
    partition_annotations,
    plan_tiles,
    read_annotations,
    read_detections,
    read_detections_with_classes,
    write_annotations,
    write_detections,
)
from shipdet.errors import ParseError
from shipdet.geometry import RotatedBox, skew_iou, to_corners
from shipdet.nms import Detection, RnmsConfig, rnms

from conftest import random_canonical_box


class TestParseDota:
    def test_axis_aligned_quad(self):
        anns = parse_dota("0 0 10 0 10 4 0 4 ship 0", image_id="P0001")
        assert len(anns) == 1
        a = anns[0]
        assert a.class_name == "ship" and not a.difficult and a.image_id == "P0001"
        # 10 px along x, 4 px along y; at theta=-90 the w side runs along y
        assert math.isclose(a.box.cx, 5, abs_tol=1e-9)
        assert math.isclose(a.box.cy, 2, abs_tol=1e-9)
        assert math.isclose(a.box.w, 4, abs_tol=1e-9)
        assert math.isclose(a.box.h, 10, abs_tol=1e-9)
        assert math.isclose(a.box.theta, -90, abs_tol=1e-9)

    def test_headers_skipped(self):
        text = "imagesource:GoogleEarth\ngsd:0.5\n0 0 10 0 10 4 0 4 ship 1\n"
        anns = parse_dota(text)
        assert len(anns) == 1
        assert anns[0].difficult

    def test_wrong_token_count_names_line(self):
        text = "0 0 10 0 10 4 0 4 ship 0\n1 2 3 4 5 6 7 8 ship\n"
        with pytest.raises(ParseError, match="line 2"):
            parse_dota(text)

    def test_non_numeric_coordinate(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_dota("a 0 10 0 10 4 0 4 ship 0")

    def test_rotated_quad_round_trips_box(self, rng):
        box = random_canonical_box(rng, center_span=100, side_lo=3, side_hi=40)
        quad = to_corners(box)
        line = " ".join(f"{v:.6f}" for p in quad for v in p) + " ship 0"
        got = parse_dota(line)[0].box
        assert skew_iou(got, box) > 0.9999


class TestSrss:
    def _record(self, rng):
        box = random_canonical_box(rng, center_span=100, side_lo=3, side_hi=40)
        corners = to_corners(box)
        side = int(rng.integers(0, 4))
        a, b = corners[side], corners[(side + 1) % 4]
        prow = ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
        return {
            "image": "scene7",
            "class": "ship",
            "points": [list(prow)] + [list(p) for p in corners],
            "difficult": 0,
        }, side

    def test_contour_side_assignment(self, rng):
        rec, side = self._record(rng)
        ann = parse_srss_contour(rec)
        assert ann.prow == side
        assert ann.class_name == "ship"
        assert ann.points is not None

    def test_too_few_points(self):
        with pytest.raises(ParseError):
            parse_srss_contour({"image": "x", "class": "ship", "points": [[0, 0], [1, 1]]})

    def test_unknown_field(self):
        with pytest.raises(ParseError, match="unknown field"):
            parse_srss_contour({"image": "x", "class": "s", "points": [[0, 0], [1, 0], [1, 1]], "spam": 1})

    def test_round_trip(self, rng):
        rec, _ = self._record(rng)
        ann = parse_srss_contour(rec)
        text = format_srss_record(ann)
        again = parse_srss(text)[0]
        assert again == ann

    def test_parse_srss_lines(self, rng):
        recs = [self._record(rng)[0] for _ in range(3)]
        text = "\n".join(json.dumps(r) for r in recs)
        assert len(parse_srss(text)) == 3


class TestDetectionFiles:
    def test_round_trip_lossless(self, rng):
        dets = [
            Detection(
                box=random_canonical_box(rng, center_span=5000, side_lo=1, side_hi=300),
                score=float(rng.uniform(0, 1)),
                class_id=int(rng.integers(0, 4)),
                prow=int(rng.integers(0, 4)) if rng.uniform() < 0.5 else None,
                image_id=f"img{int(rng.integers(0, 9))}",
            )
            for _ in range(1000)
        ]
        buf = io.StringIO()
        write_detections(dets, buf)
        back = read_detections(io.StringIO(buf.getvalue()))
        assert len(back) == len(dets)
        for a, b in zip(dets, back):
            assert a.image_id == b.image_id and a.class_id == b.class_id and a.prow == b.prow
            assert abs(a.score - b.score) <= 1e-9
            for u, v in zip(a.box.astuple(), b.box.astuple()):
                assert abs(u - v) <= 1e-9

    def test_unknown_field_named(self):
        line = json.dumps(
            {"image_id": "x", "class": 0, "score": 0.5, "cx": 0, "cy": 0, "w": 2, "h": 1, "theta_deg": -45, "bogus": 3}
        )
        with pytest.raises(ParseError, match="bogus"):
            read_detections(io.StringIO(line))

    def test_missing_field_named(self):
        line = json.dumps({"image_id": "x", "class": 0, "cx": 0, "cy": 0, "w": 2, "h": 1, "theta_deg": -45})
        with pytest.raises(ParseError, match="score"):
            read_detections(io.StringIO(line))

    def test_empty_file(self):
        assert read_detections(io.StringIO("")) == []

    def test_class_names_map_both_ways(self):
        det = Detection(box=RotatedBox(0, 0, 4, 2, -45), score=0.5, class_id=1, image_id="a")
        buf = io.StringIO()
        write_detections([det], buf, class_names=["boat", "ship"])
        assert json.loads(buf.getvalue())["class"] == "ship"
        back = read_detections(io.StringIO(buf.getvalue()), class_names=["boat", "ship"])
        assert back[0].class_id == 1

    def test_string_classes_auto_mapped_sorted(self):
        lines = []
        for name in ("tug", "boat", "tug"):
            lines.append(
                json.dumps(
                    {"image_id": "x", "class": name, "score": 0.5, "cx": 0, "cy": 0, "w": 2, "h": 1, "theta_deg": -45}
                )
            )
        dets, used = read_detections_with_classes(io.StringIO("\n".join(lines)))
        assert used == ["boat", "tug"]
        assert [d.class_id for d in dets] == [1, 0, 1]

    def test_unlisted_class_name_rejected(self):
        line = json.dumps(
            {"image_id": "x", "class": "kayak", "score": 0.5, "cx": 0, "cy": 0, "w": 2, "h": 1, "theta_deg": -45}
        )
        with pytest.raises(ParseError, match="kayak"):
            read_detections(io.StringIO(line), class_names=["boat"])


class TestAnnotationFiles:
    def test_round_trip(self, rng):
        anns = [
            Annotation(
                image_id="img0",
                class_name="ship",
                box=random_canonical_box(rng),
                difficult=bool(rng.integers(0, 2)),
                prow=int(rng.integers(0, 4)),
            )
            for _ in range(50)
        ]
        buf = io.StringIO()
        write_annotations(anns, buf)
        back = read_annotations(io.StringIO(buf.getvalue()))
        for a, b in zip(anns, back):
            assert (a.image_id, a.class_name, a.difficult, a.prow) == (b.image_id, b.class_name, b.difficult, b.prow)
            for u, v in zip(a.box.astuple(), b.box.astuple()):
                assert abs(u - v) <= 1e-9


class TestPlanTiles:
    def test_large_scene_plan(self):
        plan = plan_tiles(10000, 10000, 1000, 0.4)
        assert plan.stride == 600.0
        xs = sorted({ox for ox, _ in plan.origins})
        assert xs == [0, 600, 1200, 1800, 2400, 3000, 3600, 4200, 4800, 5400, 6000, 6600, 7200, 7800, 8400, 9000]
        assert len(plan.origins) == 256

    def test_scene_smaller_than_tile(self):
        plan = plan_tiles(500, 400, 1000, 0.4)
        assert plan.origins == ((0.0, 0.0),)

    def test_zero_overlap_grid(self):
        plan = plan_tiles(3000, 2000, 1000, 0.0)
        assert sorted({ox for ox, _ in plan.origins}) == [0, 1000, 2000]
        assert sorted({oy for _, oy in plan.origins}) == [0, 1000]

    def test_coverage(self, rng):
        plan = plan_tiles(5230, 4111, 1000, 0.4)
        for _ in range(500):
            x = rng.uniform(0, 5230)
            y = rng.uniform(0, 4111)
            hits = sum(
                1 for ox, oy in plan.origins if ox <= x <= ox + 1000 and oy <= y <= oy + 1000
            )
            assert hits >= 1

    def test_validation(self):
        with pytest.raises(ValueError):
            plan_tiles(100, 100, 0, 0.4)
        with pytest.raises(ValueError):
            plan_tiles(100, 100, 50, 1.0)

    def test_json_round_trip(self):
        plan = plan_tiles(10000, 8000, 1000, 0.4)
        assert TilePlan.from_dict(json.loads(json.dumps(plan.to_dict()))) == plan


class TestAssignment:
    def _ann(self, cx, cy):
        return Annotation(image_id="s", class_name="ship", box=RotatedBox(cx, cy, 40, 10, -30))

    def test_center_inside_shifted(self):
        plan = plan_tiles(3000, 3000, 1000, 0.4)
        a = self._ann(1500, 700)
        parts = partition_annotations([a], plan)
        owners = [i for i, p in enumerate(parts) if p]
        assert len(owners) == 1
        local = parts[owners[0]][0]
        ox, oy = plan.origins[owners[0]]
        assert ox <= a.box.cx <= ox + 1000 and oy <= a.box.cy <= oy + 1000
        assert local.box.cx == a.box.cx - ox and local.box.cy == a.box.cy - oy

    def test_boundary_goes_to_lower_origin(self):
        plan = plan_tiles(2000, 1000, 1000, 0.0)
        a = self._ann(1000.0, 500.0)  # exactly on the shared boundary
        parts = partition_annotations([a], plan)
        assert [len(p) for p in parts] == [1, 0]

    def test_partition_is_exact(self, rng):
        plan = plan_tiles(5000, 5000, 1000, 0.4)
        anns = [self._ann(rng.uniform(0, 5000), rng.uniform(0, 5000)) for _ in range(200)]
        parts = partition_annotations(anns, plan)
        assert sum(len(p) for p in parts) == len(anns)

    def test_assign_to_tile_view(self):
        plan = plan_tiles(3000, 3000, 1000, 0.4)
        anns = [self._ann(100, 100), self._ann(2900, 2900)]
        assert len(assign_to_tile(anns, plan, 0)) == 1
        assert len(assign_to_tile(anns, plan, len(plan.origins) - 1)) == 1

    def test_empty_tile_gives_empty_list(self):
        plan = plan_tiles(3000, 3000, 1000, 0.4)
        assert assign_to_tile([self._ann(100, 100)], plan, 5) == []


class TestMergeTiles:
    def _det(self, box, score=0.9, image_id="scene"):
        return Detection(box=box, score=score, class_id=0, image_id=image_id)

    def test_single_detection_shifted(self):
        plan = plan_tiles(3000, 3000, 1000, 0.4)
        per_tile = [[] for _ in plan.origins]
        per_tile[1] = [self._det(RotatedBox(100, 200, 40, 10, -30))]
        out = merge_tiles(per_tile, plan)
        ox, oy = plan.origins[1]
        assert len(out) == 1
        assert out[0].box.cx == 100 + ox and out[0].box.cy == 200 + oy

    def test_duplicate_across_tiles_deduplicated(self):
        plan = plan_tiles(2000, 1000, 1000, 0.4)
        # same physical ship seen from two overlapping tiles
        ship = RotatedBox(700, 500, 60, 12, -40)
        t0 = self._det(RotatedBox(ship.cx, ship.cy, ship.w, ship.h, ship.theta), 0.9)
        ox = plan.origins[1][0]
        t1 = self._det(RotatedBox(ship.cx - ox, ship.cy, ship.w, ship.h, ship.theta), 0.8)
        per_tile = [[t0], [t1]] + [[] for _ in plan.origins[2:]]
        out = merge_tiles(per_tile, plan)
        assert len(out) == 1
        assert out[0].score == 0.9

    def test_single_full_scene_tile_equals_rnms(self, rng):
        plan = plan_tiles(500, 500, 1000, 0.4)
        assert plan.origins == ((0.0, 0.0),)
        dets = [
            self._det(random_canonical_box(rng, center_span=100, side_lo=2, side_hi=30), float(rng.uniform(0, 1)))
            for _ in range(30)
        ]
        assert merge_tiles([dets], plan) == rnms(dets, RnmsConfig())

    def test_group_count_must_match_plan(self):
        plan = plan_tiles(3000, 3000, 1000, 0.4)
        with pytest.raises(ValueError):
            merge_tiles([[]], plan)
