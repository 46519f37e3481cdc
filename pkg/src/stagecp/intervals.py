"""Interval constructions: split conformal, separate-component, unified
scaled-component, and the signed asymmetric heuristic.

A prediction interval is either a finite [lo, hi] around the pipeline
prediction or an Abstained marker (infinite half-width). Whether an
abstained interval counts as covering the truth depends on context: the
online update bookkeeping treats the infinite interval as covering, while
reporting may count it as a miss. Both policies are explicit here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import TripletPoint
from .errors import EmptyScores
from .predictors import TwoStagePipeline, predict_pipeline
from .quantiles import (
    QuantileLevel,
    conformal_quantile,
    signed_lower_quantile,
    signed_upper_quantile,
)
from .residuals import component_arrays


class AbstentionPolicy(enum.Enum):
    """How an abstained interval is scored.

    ALGORITHMIC: the infinite interval covers (used by the online update
    rules, whose guarantees rely on it). REPORTING: abstention counts as
    a miss (used when summarizing runs where "NA" is a failure to answer).
    """

    ALGORITHMIC = "algorithmic"
    REPORTING = "reporting"


@dataclass(frozen=True)
class PredictionInterval:
    """Symmetric or asymmetric interval around a point prediction."""

    center: float
    lo: float
    hi: float
    abstained: bool = False

    @property
    def half_width(self) -> float:
        if self.abstained:
            return math.inf
        return (self.hi - self.lo) / 2.0

    @property
    def width(self) -> float:
        if self.abstained:
            return math.inf
        return self.hi - self.lo

    @staticmethod
    def symmetric(center: float, half_width: float) -> "PredictionInterval":
        if not math.isfinite(half_width):
            return PredictionInterval(center, -math.inf, math.inf, abstained=True)
        return PredictionInterval(center, center - half_width, center + half_width)

    @staticmethod
    def asymmetric(center: float, lo: float, hi: float) -> "PredictionInterval":
        if not (math.isfinite(lo) and math.isfinite(hi)):
            return PredictionInterval(center, -math.inf, math.inf, abstained=True)
        return PredictionInterval(center, lo, hi)


@dataclass(frozen=True)
class ScalingConfig:
    """Scaling coefficients and quantile levels for the unified interval."""

    a: float = 1.0
    b: float = 1.0
    c: QuantileLevel = 0.1
    d: QuantileLevel = 0.1
    alpha: float = 0.1


def covers(
    interval: PredictionInterval,
    y: float,
    policy: AbstentionPolicy = AbstentionPolicy.ALGORITHMIC,
) -> bool:
    """Whether the interval contains y, abstention scored per policy."""
    if interval.abstained:
        return policy is AbstentionPolicy.ALGORITHMIC
    return interval.lo <= y <= interval.hi


def scaled_term(coef: float, quantile: float) -> float:
    """coef * quantile with the convention 0 * inf = 0, so a zeroed
    component is masked even when its quantile abstains."""
    if coef == 0.0:
        return 0.0
    return coef * quantile


def interval_split_conformal(
    p: TwoStagePipeline,
    conf: Sequence[TripletPoint],
    alpha: QuantileLevel,
    w: np.ndarray,
) -> PredictionInterval:
    """Standard split conformal interval on the full residual."""
    if not conf:
        raise EmptyScores("conformal set is empty")
    comps = component_arrays(p, conf)
    half = conformal_quantile(comps.r_total, alpha)
    _, y_hat = predict_pipeline(p, w)
    return PredictionInterval.symmetric(y_hat, half)


def interval_separate(
    p: TwoStagePipeline,
    conf: Sequence[TripletPoint],
    c: QuantileLevel,
    d: QuantileLevel,
    w: np.ndarray,
) -> PredictionInterval:
    """Sum of component quantiles at levels 1-c and 1-d."""
    if not conf:
        raise EmptyScores("conformal set is empty")
    comps = component_arrays(p, conf)
    half = conformal_quantile(comps.delta_r1, c) + conformal_quantile(comps.r2, d)
    _, y_hat = predict_pipeline(p, w)
    return PredictionInterval.symmetric(y_hat, half)


def interval_unified(
    p: TwoStagePipeline,
    conf: Sequence[TripletPoint],
    cfg: ScalingConfig,
    w: np.ndarray,
) -> PredictionInterval:
    """Scaled sum a*Q_{1-c}(dR1) + b*Q_{1-d}(R2); a=b=1 reduces to the
    separate-component interval, c=d=alpha to the pure scaled form."""
    if not conf:
        raise EmptyScores("conformal set is empty")
    comps = component_arrays(p, conf)
    half = scaled_term(cfg.a, conformal_quantile(comps.delta_r1, cfg.c)) + scaled_term(
        cfg.b, conformal_quantile(comps.r2, cfg.d)
    )
    _, y_hat = predict_pipeline(p, w)
    return PredictionInterval.symmetric(y_hat, half)


def interval_signed(
    p: TwoStagePipeline,
    conf: Sequence[TripletPoint],
    cfg: ScalingConfig,
    w: np.ndarray,
) -> PredictionInterval:
    """Asymmetric interval from signed components, c/2 and d/2 per tail.

    Lower-tail quantiles mirror the upper-tail (m+1) rule; either tail
    abstaining makes the whole interval abstain.
    """
    if not conf:
        raise EmptyScores("conformal set is empty")
    r2s, dr1s = _signed_component_arrays(p, conf)
    _, y_hat = predict_pipeline(p, w)
    lo = (
        y_hat
        + scaled_term(cfg.a, signed_lower_quantile(dr1s, cfg.c / 2.0))
        + scaled_term(cfg.b, signed_lower_quantile(r2s, cfg.d / 2.0))
    )
    hi = (
        y_hat
        + scaled_term(cfg.a, signed_upper_quantile(dr1s, cfg.c / 2.0))
        + scaled_term(cfg.b, signed_upper_quantile(r2s, cfg.d / 2.0))
    )
    return PredictionInterval.asymmetric(y_hat, lo, hi)


def _signed_component_arrays(
    p: TwoStagePipeline, conf: Sequence[TripletPoint]
) -> tuple[np.ndarray, np.ndarray]:
    """(r2_signed, delta_r1_signed) arrays over the conformal set."""
    from .core import w_matrix, x_matrix, y_vector
    from .predictors import pipeline_predict_batch

    mu2_x = p.mu2_hat.predict_batch(x_matrix(conf))[:, 0]
    _, y_hat = pipeline_predict_batch(p, w_matrix(conf))
    y = y_vector(conf)
    return y - mu2_x, y_hat - mu2_x
