"""Deterministic feature-grid sampling kernels.

Two coordinate spaces appear here:

* pixel space, where feature cell (r, c) occupies [c, c+1) x [r, r+1)
  and has its center at (c + 0.5, r + 0.5). Boxes live in pixel space
  (divided by the level stride before sampling).
* index space, where integer coordinates hit cell centers exactly. This
  is the space :func:`bilinear_sample` interpolates in; the pooling ops
  convert pixel points via ``p - 0.5``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError
from .geometry import HorizontalBox, RotatedBox


@dataclass(frozen=True)
class FeatureGrid:
    """Dense feature map with values indexed (channel, row, col)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3:
            raise ValueError(f"expected (channels, height, width), got shape {v.shape}")
        if v.shape[1] < 1 or v.shape[2] < 1:
            raise ValueError(f"grid must be at least 1x1, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("grid values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def _interp(values: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear interpolation in index space, clamp-to-edge.

    values: (C, H, W); xs/ys: any common shape. Returns (C, *shape).
    """
    _, h, w = values.shape
    x = np.clip(xs, 0.0, w - 1.0)
    y = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = x - x0
    wy = y - y0
    v00 = values[:, y0, x0]
    v01 = values[:, y0, x1]
    v10 = values[:, y1, x0]
    v11 = values[:, y1, x1]
    return (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11)


def bilinear_sample(grid: FeatureGrid, x: float, y: float, channel: int) -> float:
    """Sample one channel at index-space (x, y); out-of-range reads clamp."""
    out = _interp(grid.values[channel : channel + 1], np.asarray(x, float), np.asarray(y, float))
    return float(out[0])


def _bin_offsets(count: int, samples_per_bin: int) -> np.ndarray:
    # fractional positions of the regular sub-grid within [0, count] bins
    bins = np.arange(count)[:, None]
    sub = (np.arange(samples_per_bin) + 0.5)[None, :] / samples_per_bin
    return (bins + sub).reshape(-1)  # (count * samples_per_bin,)


def roi_align(
    grid: FeatureGrid,
    box: HorizontalBox,
    out_h: int,
    out_w: int,
    samples_per_bin: int = 2,
    stride: float = 1.0,
) -> FeatureGrid:
    """Average-pool a horizontal box into (out_h, out_w) bins.

    Each bin averages samples_per_bin**2 bilinear samples on a regular
    sub-grid of the bin.
    """
    if out_h < 1 or out_w < 1 or samples_per_bin < 1:
        raise ValueError("output dims and samples_per_bin must be >= 1")
    xmin, ymin = box.xmin / stride, box.ymin / stride
    bw = box.width / stride
    bh = box.height / stride
    if bw <= 0.0 or bh <= 0.0:
        raise DegenerateGeometryError(f"box has no area: {box}")
    px = xmin + _bin_offsets(out_w, samples_per_bin) * (bw / out_w)
    py = ymin + _bin_offsets(out_h, samples_per_bin) * (bh / out_h)
    vals = _interp(grid.values, px[None, :] - 0.5, py[:, None] - 0.5)
    c = grid.channels
    s = samples_per_bin
    vals = vals.reshape(c, out_h, s, out_w, s)
    return FeatureGrid(vals.mean(axis=(2, 4)))


def rroi_align(
    grid: FeatureGrid,
    box: RotatedBox,
    out_h: int,
    out_w: int,
    samples_per_bin: int = 2,
    stride: float = 1.0,
) -> FeatureGrid:
    """Rotated-box pooling: an axis-aligned w x h template of sample
    points mapped through the box rotation and translation.

    Template columns run along the box w direction, rows along h. For an
    axis-aligned box (theta = -90) this equals :func:`roi_align` on the
    bounding hbox with the axes exchanged consistently.
    """
    if out_h < 1 or out_w < 1 or samples_per_bin < 1:
        raise ValueError("output dims and samples_per_bin must be >= 1")
    w = box.w / stride
    h = box.h / stride
    if w <= 0.0 or h <= 0.0:
        raise DegenerateGeometryError(f"box has no area: {box}")
    cx, cy = box.cx / stride, box.cy / stride
    tx = -w / 2.0 + _bin_offsets(out_w, samples_per_bin) * (w / out_w)
    ty = -h / 2.0 + _bin_offsets(out_h, samples_per_bin) * (h / out_h)
    t = math.radians(box.theta)
    c_, s_ = math.cos(t), math.sin(t)
    px = cx + c_ * tx[None, :] - s_ * ty[:, None]
    py = cy + s_ * tx[None, :] + c_ * ty[:, None]
    vals = _interp(grid.values, px - 0.5, py - 0.5)
    c = grid.channels
    s = samples_per_bin
    vals = vals.reshape(c, out_h, s, out_w, s)
    return FeatureGrid(vals.mean(axis=(2, 4)))


def geometric_mask(window: HorizontalBox, inner: RotatedBox, out_h: int, out_w: int) -> FeatureGrid:
    """Binary footprint of a rotated box inside a window.

    Cell (r, c) is 1 iff the window sample point at the cell center lies
    inside ``inner``; boundary points count as inside.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError("output dims must be >= 1")
    if window.width <= 0.0 or window.height <= 0.0:
        raise DegenerateGeometryError(f"window has no area: {window}")
    px = window.xmin + (np.arange(out_w) + 0.5) * (window.width / out_w)
    py = window.ymin + (np.arange(out_h) + 0.5) * (window.height / out_h)
    t = math.radians(inner.theta)
    c, s = math.cos(t), math.sin(t)
    dx = px - inner.cx
    dy = py - inner.cy
    u = c * dx[None, :] + s * dy[:, None]
    v = -s * dx[None, :] + c * dy[:, None]
    mask = (np.abs(u) <= inner.w / 2.0) & (np.abs(v) <= inner.h / 2.0)
    return FeatureGrid(mask[None, :, :].astype(np.float64))
