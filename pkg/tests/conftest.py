import math

import numpy as np
import pytest

from shipdet.geometry import RotatedBox, canonicalize


def raw_corners(cx, cy, w, h, theta):
    """Corner formula applied directly, no canonicalization."""
    t = math.radians(theta)
    c, s = math.cos(t), math.sin(t)
    hw, hh = w / 2.0, h / 2.0
    return [
        (cx + c * ox - s * oy, cy + s * ox + c * oy)
        for ox, oy in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh))
    ]


def corner_sets_equal(a, b, tol=1e-9):
    sa = sorted((round(x, 12), round(y, 12)) for x, y in a)
    sb = sorted((round(x, 12), round(y, 12)) for x, y in b)
    return all(
        abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol for p, q in zip(sa, sb)
    )


def random_canonical_box(rng, center_span=100.0, side_lo=1.0, side_hi=100.0):
    return canonicalize(
        RotatedBox(
            cx=rng.uniform(-center_span, center_span),
            cy=rng.uniform(-center_span, center_span),
            w=rng.uniform(side_lo, side_hi),
            h=rng.uniform(side_lo, side_hi),
            theta=rng.uniform(-720.0, 720.0),
        )
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
