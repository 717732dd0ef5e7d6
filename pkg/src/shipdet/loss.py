"""Multitask loss arithmetic: classification, horizontal and rotational
regression, and the prow-direction term, each mean-normalized by its own
sample count.

The prow term defaults to a 4-way cross-entropy over the side index: a
circular label under smooth-L1 is ill-posed (sides 3 and 0 are physical
neighbors but differ by 3 numerically). The literal regression-on-index
reading stays available via ``prow_mode="smooth-l1-on-index"``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .encoding import RegressionTarget

PROB_FLOOR = 1e-12

PROW_CROSS_ENTROPY = "cross-entropy"
PROW_SMOOTH_L1 = "smooth-l1-on-index"


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 10.0


@dataclass
class LossSample:
    """One training sample's predictions and targets.

    ``positive`` is the p indicator; regression and prow pairs only
    contribute when it is set.
    """

    class_probs: np.ndarray
    class_label: int
    positive: bool = False
    h_target: RegressionTarget | None = None
    h_pred: RegressionTarget | None = None
    r_target: RegressionTarget | None = None
    r_pred: RegressionTarget | None = None
    prow_probs: np.ndarray | None = None
    prow_label: int | None = None

    def __post_init__(self):
        probs = np.asarray(self.class_probs, dtype=np.float64)
        if abs(float(probs.sum()) - 1.0) > 1e-6:
            raise ValueError(f"class_probs must sum to 1, got {probs.sum()!r}")
        self.class_probs = probs
        if self.prow_probs is not None:
            self.prow_probs = np.asarray(self.prow_probs, dtype=np.float64)


@dataclass
class LossBreakdown:
    total: float
    cls: float
    horizontal: float
    rotational: float
    prow: float
    clamped: bool = False
    empty: bool = False


def smooth_l1(x: float) -> float:
    """0.5 x^2 inside the unit interval, |x| - 0.5 outside; both branches
    meet at 0.5 for |x| = 1."""
    ax = abs(x)
    if ax < 1.0:
        return 0.5 * x * x
    return ax - 0.5


def smooth_l1_grad(x: float) -> float:
    """Derivative of :func:`smooth_l1`; clamps to +/-1."""
    if abs(x) < 1.0:
        return x
    return math.copysign(1.0, x)


def cls_loss(probs, label: int) -> float:
    """Negative log probability of the labeled class."""
    p = float(np.asarray(probs, dtype=np.float64)[label])
    if p <= 0.0:
        warnings.warn(f"zero probability for label {label}; clamped to {PROB_FLOOR}")
        p = PROB_FLOOR
    return -math.log(p)


def reg_loss(t_star: RegressionTarget, t: RegressionTarget) -> float:
    """Smooth-L1 summed over the target coordinates.

    The angle coordinate joins the sum only when both targets carry one.
    """
    if (t_star.ttheta is None) != (t.ttheta is None):
        raise ValueError("cannot mix 4-field and 5-field regression targets")
    total = (
        smooth_l1(t_star.tx - t.tx)
        + smooth_l1(t_star.ty - t.ty)
        + smooth_l1(t_star.tw - t.tw)
        + smooth_l1(t_star.th - t.th)
    )
    if t_star.ttheta is not None:
        total += smooth_l1(t_star.ttheta - t.ttheta)
    return total


def _prow_term(sample: LossSample, mode: str) -> tuple[float, bool]:
    probs = sample.prow_probs
    label = sample.prow_label
    if probs is None or label is None:
        return 0.0, False
    if mode == PROW_CROSS_ENTROPY:
        p = float(probs[label])
        if p <= 0.0:
            warnings.warn(f"zero prow probability for side {label}; clamped")
            return -math.log(PROB_FLOOR), True
        return -math.log(p), False
    if mode == PROW_SMOOTH_L1:
        pred = int(np.argmax(probs))
        return smooth_l1(float(label - pred)), False
    raise ValueError(f"unknown prow_mode {mode!r}")


def multitask_loss(
    samples: list[LossSample],
    weights: LossWeights | None = None,
    prow_mode: str = PROW_CROSS_ENTROPY,
    n_cls: int | None = None,
    n_reg_h: int | None = None,
    n_reg_r: int | None = None,
) -> LossBreakdown:
    """Weighted sum of the four task terms.

    total = cls + lambda1 * horizontal + lambda2 * rotational
    + lambda3 * prow. Each term is divided by its own count: n_cls
    defaults to the number of samples, the regression counts to the
    number of positives (the rotational count is shared with the prow
    term). Explicit counts override the defaults.
    """
    weights = weights or LossWeights()
    if not samples:
        warnings.warn("multitask_loss called with no samples")
        return LossBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, empty=True)

    positives = [s for s in samples if s.positive]
    nc = n_cls if n_cls is not None else len(samples)
    nh = n_reg_h if n_reg_h is not None else max(len(positives), 1)
    nr = n_reg_r if n_reg_r is not None else max(len(positives), 1)

    clamped = False
    cls_sum = 0.0
    for s in samples:
        p = float(s.class_probs[s.class_label])
        if p <= 0.0:
            warnings.warn(f"zero probability for label {s.class_label}; clamped")
            p = PROB_FLOOR
            clamped = True
        cls_sum -= math.log(p)

    h_sum = 0.0
    r_sum = 0.0
    prow_sum = 0.0
    for s in positives:
        if s.h_target is not None and s.h_pred is not None:
            h_sum += reg_loss(s.h_target, s.h_pred)
        if s.r_target is not None and s.r_pred is not None:
            r_sum += reg_loss(s.r_target, s.r_pred)
        term, was_clamped = _prow_term(s, prow_mode)
        prow_sum += term
        clamped = clamped or was_clamped

    cls_term = cls_sum / nc
    h_term = h_sum / nh
    r_term = r_sum / nr
    prow_term = prow_sum / nr
    total = cls_term + weights.lambda1 * h_term + weights.lambda2 * r_term + weights.lambda3 * prow_term
    return LossBreakdown(total, cls_term, h_term, r_term, prow_term, clamped=clamped)
