"""Conformal-corrected empirical quantiles with abstention semantics.

All quantiles use the finite-sample (m+1) convention: with m scores and
miscoverage level q, the threshold is the k-th smallest score where
k = ceil((m+1)(1-q)). When k exceeds m the data cannot support the level
and the threshold is +inf: downstream interval builders map that to an
abstained (infinite) interval rather than an error. Levels outside [0,1]
are legal inputs because adaptive updates can push them there; negative
levels force +inf, levels at or above 1 collapse to 0.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import AllZeroWeights, EmptyScores, LengthMismatch

# Quantile level, nominally miscoverage in [0,1]; may exit the unit
# interval under online updates.
QuantileLevel = float


def conformal_quantile(
    scores: Sequence[float] | np.ndarray, level: QuantileLevel
) -> float:
    """Order-statistic threshold at miscoverage `level`.

    Returns +inf when the level demands a rank beyond the sample
    (abstention-forcing), 0 when the level is >= 1.
    """
    scores = np.asarray(scores, dtype=float)
    m = scores.size
    if m == 0:
        raise EmptyScores("no scores to take a quantile of")
    if level < 0:
        return math.inf
    k = math.ceil((m + 1) * (1.0 - level))
    if k > m:
        return math.inf
    if k <= 0:
        return 0.0
    return float(np.partition(scores, k - 1)[k - 1])


def weighted_quantile(
    scores: Sequence[float] | np.ndarray,
    weights: Sequence[float] | np.ndarray,
    level: QuantileLevel,
) -> float:
    """Weighted conformal quantile.

    Weights are normalized by 1 + sum(weights); the leftover mass sits on
    +inf, so the threshold is +inf whenever the finite scores cannot
    accumulate 1 - level of normalized mass. With equal weights this
    reduces exactly to conformal_quantile.
    """
    scores = np.asarray(scores, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if scores.size != weights.size:
        raise LengthMismatch(
            f"{scores.size} scores but {weights.size} weights"
        )
    if scores.size == 0:
        raise EmptyScores("no scores to take a quantile of")
    if np.any(weights < 0):
        raise AllZeroWeights("weights must be nonnegative")
    total_weight = float(weights.sum())
    if total_weight <= 0:
        raise AllZeroWeights("weights must not all be zero")
    target = 1.0 - level
    if target <= 0:
        return 0.0
    # Compare accumulated weight against target * (1 + sum) rather than
    # dividing, so the equal-weights case matches the order-statistic rule
    # exactly.
    threshold = target * (1.0 + total_weight)
    order = np.argsort(scores, kind="stable")
    cum = 0.0
    for idx in order:
        cum += float(weights[idx])
        if cum >= threshold:
            return float(scores[idx])
    return math.inf


def signed_upper_quantile(
    scores: Sequence[float] | np.ndarray, tail: QuantileLevel
) -> float:
    """Upper-tail threshold Q_{1-tail} for signed scores.

    Same (m+1) rank rule as conformal_quantile but without the
    nonnegativity collapse: +inf on abstention, the sample minimum when
    the tail mass reaches or exceeds 1.
    """
    scores = np.asarray(scores, dtype=float)
    m = scores.size
    if m == 0:
        raise EmptyScores("no scores to take a quantile of")
    if tail < 0:
        return math.inf
    k = math.ceil((m + 1) * (1.0 - tail))
    if k > m:
        return math.inf
    if k <= 0:
        k = 1
    return float(np.partition(scores, k - 1)[k - 1])


def signed_lower_quantile(
    scores: Sequence[float] | np.ndarray, tail: QuantileLevel
) -> float:
    """Lower-tail threshold Q_{tail}, mirroring the upper-tail rule."""
    return -signed_upper_quantile(-np.asarray(scores, dtype=float), tail)
