"""Risk-controlled selection of interval scaling parameters.

Candidate scaling pairs (a, b) are tested against the null hypothesis
that their interval's miscoverage exceeds the target level. p-values come
from an exact binomial tail (IID calibration data) or a mixing
concentration bound (stationary dependent data), and a FWER-controlling
procedure accepts a validated subset. An empty validated set is a legal
outcome and means the method abstains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .core import TripletPoint
from .errors import (
    EmptyCalibration,
    InvalidLevel,
    InvalidMixingCoefficients,
)
from .intervals import AbstentionPolicy, PredictionInterval, covers

FWER_METHODS = ("fixed-sequence", "bonferroni")


@dataclass(frozen=True)
class LambdaGrid:
    """Finite ordered candidate set of scaling pairs.

    Candidates are kept in fixed-sequence order: descending a+b, ties
    broken by descending a, so wider (lower-risk) intervals are tested
    first.
    """

    candidates: tuple[tuple[float, float], ...]

    @staticmethod
    def default(steps: int = 10) -> "LambdaGrid":
        """Regular grid over [0,1]^2 with the given number of steps per
        axis (steps=10 gives the 121-candidate grid)."""
        pairs = [
            (i / steps, j / steps)
            for i in range(steps, -1, -1)
            for j in range(steps, -1, -1)
        ]
        pairs.sort(key=lambda ab: (-round(ab[0] + ab[1], 12), -ab[0]))
        return LambdaGrid(candidates=tuple(pairs))

    @staticmethod
    def from_pairs(pairs: Sequence[tuple[float, float]]) -> "LambdaGrid":
        ordered = sorted(pairs, key=lambda ab: (-round(ab[0] + ab[1], 12), -ab[0]))
        return LambdaGrid(candidates=tuple(ordered))

    @cached_property
    def a_values(self) -> np.ndarray:
        return np.array([a for a, _ in self.candidates])

    @cached_property
    def b_values(self) -> np.ndarray:
        return np.array([b for _, b in self.candidates])

    def widths(self, q_dr1: float, q_r2: float) -> np.ndarray:
        """Interval half-widths a*q_dr1 + b*q_r2 for every candidate, with
        the 0 * inf = 0 masking convention."""

        def term(coefs: np.ndarray, q: float) -> np.ndarray:
            if math.isinf(q):
                return np.where(coefs == 0.0, 0.0, math.inf)
            return coefs * q

        return term(self.a_values, q_dr1) + term(self.b_values, q_r2)


@dataclass(frozen=True)
class CandidateRecord:
    a: float
    b: float
    width: float
    empirical_risk: float
    p_value: float
    accepted: bool


@dataclass(frozen=True)
class CalibrationVerdict:
    """Per-candidate test results plus the validated subset (in fixed-
    sequence order). Empty lambda_val means abstention."""

    records: tuple[CandidateRecord, ...]
    lambda_val: tuple[tuple[float, float], ...]

    @property
    def abstained(self) -> bool:
        return not self.lambda_val


def empirical_risk(
    cal: Sequence[TripletPoint],
    interval_builder: Callable[[np.ndarray], PredictionInterval],
    policy: AbstentionPolicy = AbstentionPolicy.ALGORITHMIC,
) -> float:
    """Fraction of calibration points whose interval misses the target.

    interval_builder maps an upstream input w to the candidate's interval;
    abstained intervals count per the chosen policy.
    """
    if not cal:
        raise EmptyCalibration("calibration set is empty")
    misses = sum(
        0 if covers(interval_builder(p.w), p.y, policy) else 1 for p in cal
    )
    return misses / len(cal)


@lru_cache(maxsize=64)
def _log_binom_coefficients(l: int) -> np.ndarray:
    lg = np.array([math.lgamma(v + 1) for v in range(l + 1)])
    return math.lgamma(l + 1) - lg - lg[::-1]


def _log_binom_pmf(l: int, level: float) -> np.ndarray:
    """log P(Bin(l, level) = k) for k = 0..l."""
    k = np.arange(l + 1)
    return (
        _log_binom_coefficients(l)
        + k * math.log(level)
        + (l - k) * math.log1p(-level)
    )


def binomial_cdf_table(l: int, level: float) -> np.ndarray:
    """P(Bin(l, level) <= k) for k = 0..l, accumulated in log space."""
    if l < 1:
        raise InvalidLevel(f"calibration size must be >= 1, got {l}")
    if not (0.0 < level < 1.0):
        raise InvalidLevel(f"binomial level must be in (0,1), got {level}")
    log_cdf = np.logaddexp.accumulate(_log_binom_pmf(l, level))
    return np.minimum(np.exp(log_cdf), 1.0)


def binomial_p_value(l: int, alpha: float, tau: float, risk_hat: float) -> float:
    """Exact binomial tail p-value P(Bin(l, alpha+tau) <= floor(l*risk)).

    Small values mean strong evidence that the true miscoverage is below
    alpha + tau. l * risk_hat is an integer by construction; the epsilon
    inside floor guards against float error in either direction.
    """
    level = alpha + tau
    count = int(math.floor(l * risk_hat + 1e-9))
    count = min(max(count, 0), l)
    table = binomial_cdf_table(l, level)
    return float(table[count])


def mixing_p_value(
    l: int, alpha: float, risk_hat: float, phi: Sequence[float] | np.ndarray
) -> float:
    """Concentration-bound p-value for stationary phi-mixing calibration
    data: min(1, 2*exp(-2*l*eps^2 / Delta^2)) with Delta = 1 + sum(phi)
    and eps the observed shortfall of the risk below alpha."""
    phi = np.asarray(phi, dtype=float)
    if phi.size and (np.any(phi < 0) or np.any(np.diff(phi) > 0)):
        raise InvalidMixingCoefficients(
            "mixing coefficients must be nonnegative and non-increasing"
        )
    if l < 1:
        raise InvalidLevel(f"calibration size must be >= 1, got {l}")
    delta = 1.0 + float(phi.sum())
    eps = max(0.0, alpha - risk_hat)
    return min(1.0, 2.0 * math.exp(-2.0 * l * eps * eps / (delta * delta)))


def bonferroni(p_values: Sequence[float] | np.ndarray, delta: float) -> list[int]:
    """Indices with p <= delta / u."""
    p_values = np.asarray(p_values, dtype=float)
    u = p_values.size
    if u == 0:
        return []
    return [i for i in range(u) if p_values[i] <= delta / u]


def fixed_sequence_test(
    p_values: Sequence[float] | np.ndarray, delta: float
) -> list[int]:
    """Maximal accepted prefix: stop at the first p > delta.

    Assumes the p-values follow the candidate ordering (widest first).
    """
    p_values = np.asarray(p_values, dtype=float)
    failing = np.nonzero(p_values > delta)[0]
    n_accepted = int(failing[0]) if failing.size else p_values.size
    return list(range(n_accepted))


def candidate_p_values(
    counts: np.ndarray, l: int, level: float, tau: float
) -> np.ndarray:
    """p-values for per-candidate miss counts at the (possibly adaptive)
    test level.

    Levels at or below 0 make the null untestable (p = 1 for all
    candidates, forcing abstention); levels at or above 1 make it vacuous
    (p = 0, accepting everything). Both extremes arise from online level
    updates and match the boundedness arguments of the adaptive method.
    """
    effective = level + tau
    if effective <= 0.0:
        return np.ones(len(counts))
    if effective >= 1.0:
        return np.zeros(len(counts))
    table = binomial_cdf_table(l, effective)
    return table[np.clip(counts, 0, l)]


def _test_grid(
    grid: LambdaGrid,
    q_dr1: float,
    q_r2: float,
    cal_residuals: np.ndarray,
    level: float,
    tau: float,
    delta: float,
    method: str,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[int]]:
    cal_residuals = np.asarray(cal_residuals, dtype=float)
    l = cal_residuals.size
    if l == 0:
        raise EmptyCalibration("calibration set is empty")
    widths = grid.widths(q_dr1, q_r2)
    counts = (cal_residuals[:, None] > widths[None, :]).sum(axis=0)
    p_values = candidate_p_values(counts, l, level, tau)
    if method == "fixed-sequence":
        accepted_idx = fixed_sequence_test(p_values, delta)
    elif method == "bonferroni":
        accepted_idx = bonferroni(p_values, delta)
    else:
        raise InvalidLevel(f"unknown FWER method: {method}")
    return widths, counts / l, p_values, accepted_idx


def accepted_lambda(
    grid: LambdaGrid,
    q_dr1: float,
    q_r2: float,
    cal_residuals: np.ndarray,
    level: float,
    tau: float,
    delta: float,
    method: str = "fixed-sequence",
) -> tuple[tuple[float, float], ...]:
    """Validated candidate pairs only (fast path for the online loop)."""
    _, _, _, accepted_idx = _test_grid(
        grid, q_dr1, q_r2, cal_residuals, level, tau, delta, method
    )
    return tuple(grid.candidates[i] for i in accepted_idx)


def calibrate_grid(
    grid: LambdaGrid,
    q_dr1: float,
    q_r2: float,
    cal_residuals: np.ndarray,
    level: float,
    tau: float,
    delta: float,
    method: str = "fixed-sequence",
) -> CalibrationVerdict:
    """Test every candidate against the calibration residuals.

    A point is covered by candidate (a, b) when its full residual is at
    most the candidate's half-width; miss counts feed the binomial test
    and the chosen FWER procedure picks the validated set.
    """
    widths, risks, p_values, accepted_idx = _test_grid(
        grid, q_dr1, q_r2, cal_residuals, level, tau, delta, method
    )
    accepted_set = set(accepted_idx)
    records = tuple(
        CandidateRecord(
            a=a,
            b=b,
            width=float(widths[i]),
            empirical_risk=float(risks[i]),
            p_value=float(p_values[i]),
            accepted=i in accepted_set,
        )
        for i, (a, b) in enumerate(grid.candidates)
    )
    lambda_val = tuple(grid.candidates[i] for i in accepted_idx)
    return CalibrationVerdict(records=records, lambda_val=lambda_val)


@dataclass(frozen=True)
class SelectedLambda:
    a: float
    b: float
    width: float


def select_lambda_nonadaptive(
    verdict: CalibrationVerdict,
    conf_residuals: np.ndarray,
    alpha: float,
) -> Optional[SelectedLambda]:
    """Among validated candidates, the one whose empirical coverage on the
    conformal set is closest to 1 - alpha; None (abstain) when the
    validated set is empty. Ties prefer the narrower interval, then
    fixed-sequence order."""
    if verdict.abstained:
        return None
    conf_residuals = np.asarray(conf_residuals, dtype=float)
    best = None
    best_key = None
    for rank, rec in enumerate(r for r in verdict.records if r.accepted):
        coverage = float((conf_residuals <= rec.width).mean())
        key = (abs(coverage - (1.0 - alpha)), rec.width, rank)
        if best_key is None or key < best_key:
            best = SelectedLambda(a=rec.a, b=rec.b, width=rec.width)
            best_key = key
    return best
