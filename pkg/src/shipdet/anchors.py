"""Multiscale anchor generation and IoU-based matching.

Anchors are axis-aligned in canonical form (theta = -90), one set of 9
aspect ratios per feature cell, area-preserving (w * h = scale**2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import RotatedBox

ALLOWED_STRIDES = (4, 8, 16, 32, 64)
DEFAULT_RATIOS = (1 / 7, 1 / 5, 1 / 3, 1 / 2, 1.0, 2.0, 3.0, 5.0, 7.0)

# Per-anchor label codes.
POSITIVE = 1
NEGATIVE = 0
IGNORE = -1


@dataclass(frozen=True)
class PyramidLevelConfig:
    """One feature-pyramid level: stride, anchor base size, aspect ratios."""

    name: str
    stride: int
    scale: float
    ratios: tuple[float, ...] = DEFAULT_RATIOS

    def __post_init__(self):
        if self.stride not in ALLOWED_STRIDES:
            raise ValueError(f"stride must be one of {ALLOWED_STRIDES}, got {self.stride}")
        if len(self.ratios) != 9:
            raise ValueError(f"expected 9 aspect ratios, got {len(self.ratios)}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")


def default_levels() -> dict[str, PyramidLevelConfig]:
    """P2..P6 with scales 32..512 and strides 4..64."""
    return {
        name: PyramidLevelConfig(name, stride, scale)
        for name, stride, scale in (
            ("P2", 4, 32.0),
            ("P3", 8, 64.0),
            ("P4", 16, 128.0),
            ("P5", 32, 256.0),
            ("P6", 64, 512.0),
        )
    }


@dataclass(frozen=True)
class MatchConfig:
    """IoU thresholds and minibatch composition for anchor matching."""

    pos_iou: float = 0.6
    neg_iou: float = 0.25
    batch: int = 256
    pos_fraction: float = 0.5

    def __post_init__(self):
        # equal thresholds mean no ignore band (the second-stage setting)
        if not 0.0 <= self.neg_iou <= self.pos_iou <= 1.0:
            raise ValueError(f"need 0 <= neg_iou <= pos_iou <= 1, got {self}")
        if self.batch < 1 or not 0.0 < self.pos_fraction <= 1.0:
            raise ValueError(f"bad batch composition: {self}")


RPN_MATCH = MatchConfig(pos_iou=0.6, neg_iou=0.25, batch=256, pos_fraction=0.5)
STAGE2_MATCH = MatchConfig(pos_iou=0.5, neg_iou=0.5, batch=128, pos_fraction=0.5)


@dataclass
class MatchResult:
    """Per-anchor labels (POSITIVE / NEGATIVE / IGNORE) and, for
    positives, the index of the matched ground truth."""

    labels: np.ndarray
    matched_gt: np.ndarray


@dataclass
class Minibatch:
    """Sampled anchor indices; ``short`` flags an underfilled batch."""

    positive: np.ndarray
    negative: np.ndarray
    short: bool

    @property
    def indices(self) -> np.ndarray:
        return np.concatenate([self.positive, self.negative])


def generate_anchors(level: PyramidLevelConfig, grid_h: int, grid_w: int) -> list[RotatedBox]:
    """All anchors of one level over a grid_h x grid_w feature map.

    Emission is row-major over cells with the ratios in listed order, so
    the count is exactly 9 * grid_h * grid_w.
    """
    if grid_h < 1 or grid_w < 1:
        raise ValueError("grid dims must be >= 1")
    shapes = [(level.scale * r**0.5, level.scale / r**0.5) for r in level.ratios]
    out: list[RotatedBox] = []
    for r in range(grid_h):
        cy = (r + 0.5) * level.stride
        for c in range(grid_w):
            cx = (c + 0.5) * level.stride
            for w, h in shapes:
                out.append(RotatedBox(cx, cy, w, h, -90.0))
    return out


def grid_size_for_image(level: PyramidLevelConfig, image_w: int, image_h: int) -> tuple[int, int]:
    """Feature-grid dims covering an image at this level's stride."""
    return (
        max(1, -(-image_h // level.stride)),
        max(1, -(-image_w // level.stride)),
    )


def match_anchors(
    anchors: Sequence,
    gts: Sequence,
    cfg: MatchConfig,
    iou_fn: Callable[[object, object], float],
) -> MatchResult:
    """Label anchors against ground truths by max IoU.

    Positive above pos_iou, negative below neg_iou, ignore between. The
    best anchor of every gt is forced positive so no gt goes unmatched.
    ``iou_fn`` picks the branch (skew or horizontal IoU).
    """
    n = len(anchors)
    if n == 0:
        raise ValueError("empty anchor list")
    m = len(gts)
    labels = np.full(n, NEGATIVE, dtype=np.int8)
    matched = np.full(n, -1, dtype=np.int64)
    if m == 0:
        return MatchResult(labels, matched)

    iou = np.zeros((n, m), dtype=np.float64)
    for i, a in enumerate(anchors):
        for j, g in enumerate(gts):
            iou[i, j] = iou_fn(a, g)

    best_gt = iou.argmax(axis=1)
    best_iou = iou[np.arange(n), best_gt]
    labels[best_iou > cfg.pos_iou] = POSITIVE
    labels[(best_iou >= cfg.neg_iou) & (best_iou <= cfg.pos_iou)] = IGNORE
    matched[labels == POSITIVE] = best_gt[labels == POSITIVE]

    # force the argmax anchor of each gt positive
    for j in range(m):
        i = int(iou[:, j].argmax())
        labels[i] = POSITIVE
        matched[i] = j
    return MatchResult(labels, matched)


def sample_minibatch(result: MatchResult, cfg: MatchConfig, seed: int) -> Minibatch:
    """Draw up to batch * pos_fraction positives plus negatives to fill.

    Uniform sampling without replacement; identical seeds reproduce the
    exact index lists. ``short`` is set when negatives cannot fill the
    batch.
    """
    rng = np.random.default_rng(seed)
    pos = np.flatnonzero(result.labels == POSITIVE)
    neg = np.flatnonzero(result.labels == NEGATIVE)
    want_pos = int(cfg.batch * cfg.pos_fraction)
    n_pos = min(len(pos), want_pos)
    pos_sample = rng.choice(pos, size=n_pos, replace=False) if n_pos else pos[:0]
    want_neg = cfg.batch - n_pos
    n_neg = min(len(neg), want_neg)
    neg_sample = rng.choice(neg, size=n_neg, replace=False) if n_neg else neg[:0]
    return Minibatch(pos_sample, neg_sample, short=n_pos + n_neg < cfg.batch)
