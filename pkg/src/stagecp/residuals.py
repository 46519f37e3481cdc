"""Residual decomposition for two-stage, auxiliary, signed, and N-stage
pipelines.

The full absolute residual R = |y - mu2(mu1(w))| is split into a
downstream part R2 = |y - mu2(x)| (error when fed the true intermediate)
and an upstream delta dR1 = | R2 - R |, the change in downstream error
caused by substituting the predicted intermediate for the true one.
The reverse triangle inequality gives R <= dR1 + R2 for every point,
which is what makes the component quantiles usable as interval widths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import AuxiliaryPoint, TripletPoint, w_matrix, x_matrix, y_vector
from .errors import TooFewStages
from .predictors import StageModel, TwoStagePipeline, pipeline_predict_batch


@dataclass(frozen=True)
class ResidualComponents:
    """Unsigned components (R, dR1, R2) for one point."""

    r_total: float
    delta_r1: float
    r2: float


@dataclass(frozen=True)
class SignedResidualComponents:
    """Signed components; r2_signed - delta_r1_signed equals the signed
    full residual exactly."""

    r2_signed: float
    delta_r1_signed: float


@dataclass(frozen=True)
class MultiStageComponents:
    """Per-stage deltas and the last-stage residual for an N-stage chain."""

    deltas: tuple[float, ...]
    r_last: float


def _guarded_delta(r2: float, r_total: float) -> float:
    """|r2 - r_total| rounded so the triangle bound survives in floats.

    The bound r_total <= delta + r2 is an equality whenever r_total >= r2,
    so nearest rounding of the subtraction can land one ulp short. Nudging
    upward (never more than a couple of ulp) keeps the bound exact without
    affecting any statistic.
    """
    delta = abs(r2 - r_total)
    while delta + r2 < r_total:
        delta = math.nextafter(delta, math.inf)
    return delta


def _guarded_delta_array(r2: np.ndarray, r_total: np.ndarray) -> np.ndarray:
    """Vectorized _guarded_delta, elementwise identical to the scalar."""
    delta = np.abs(r2 - r_total)
    short = delta + r2 < r_total
    while np.any(short):
        delta[short] = np.nextafter(delta[short], np.inf)
        short = delta + r2 < r_total
    return delta


def _components(y: float, mu2_x: float, mu2_xhat: float) -> ResidualComponents:
    r2 = abs(y - mu2_x)
    r_total = abs(y - mu2_xhat)
    return ResidualComponents(
        r_total=r_total, delta_r1=_guarded_delta(r2, r_total), r2=r2
    )


def decompose(p: TwoStagePipeline, point: TripletPoint) -> ResidualComponents:
    """Unsigned decomposition of one point's residual."""
    mu2_x = float(p.mu2_hat.predict(point.x)[0])
    x_hat = p.mu1_hat.predict(point.w)
    mu2_xhat = float(p.mu2_hat.predict(x_hat)[0])
    return _components(point.y, mu2_x, mu2_xhat)


def decompose_signed(
    p: TwoStagePipeline, point: TripletPoint
) -> SignedResidualComponents:
    """Signed decomposition; components sum to the full signed error."""
    mu2_x = float(p.mu2_hat.predict(point.x)[0])
    x_hat = p.mu1_hat.predict(point.w)
    mu2_xhat = float(p.mu2_hat.predict(x_hat)[0])
    return SignedResidualComponents(
        r2_signed=point.y - mu2_x,
        delta_r1_signed=mu2_xhat - mu2_x,
    )


def decompose_aux(
    mu2_aux: StageModel, point: AuxiliaryPoint, x_hat: np.ndarray
) -> ResidualComponents:
    """Decomposition when the downstream model takes auxiliary features.

    mu2_aux consumes the concatenation of the intermediate vector and
    point.x_aux; x_hat is the upstream prediction for point.base.w.
    """
    base = point.base
    mu2_x = float(mu2_aux.predict(np.concatenate([base.x, point.x_aux]))[0])
    mu2_xhat = float(
        mu2_aux.predict(np.concatenate([np.atleast_1d(x_hat), point.x_aux]))[0]
    )
    return _components(base.y, mu2_x, mu2_xhat)


def decompose_multistage(
    stages: Sequence[StageModel], chain: Sequence[np.ndarray]
) -> MultiStageComponents:
    """Decomposition for a chain of N >= 2 stages.

    chain holds the observed values w_1 .. w_{N+1}; stage i maps the space
    of w_i to that of w_{i+1}. The final entry is the scalar target. Each
    delta_i compares the tail composition started from the observed w_{i+1}
    against the one started from w_i; r_last is the last stage's own error.
    """
    n = len(stages)
    if n < 2:
        raise TooFewStages(f"need at least 2 stages, got {n}")
    if len(chain) != n + 1:
        raise TooFewStages(f"chain must have {n + 1} entries, got {len(chain)}")
    target = float(np.atleast_1d(np.asarray(chain[-1], dtype=float))[0])

    def tail(i: int) -> float:
        # Feed chain[i-1] (observed w_i) through stages i..N, 1-indexed.
        v = np.atleast_1d(np.asarray(chain[i - 1], dtype=float))
        for stage in stages[i - 1 :]:
            v = stage.predict(v)
        return float(v[0])

    tails = [abs(target - tail(i)) for i in range(1, n + 1)]
    deltas = [_guarded_delta(tails[i], tails[i - 1]) for i in range(1, n)]
    # Same float guard for the whole-chain bound as evaluated by callers.
    while sum(deltas) + tails[-1] < tails[0]:
        deltas[-1] = math.nextafter(deltas[-1], math.inf)
    return MultiStageComponents(deltas=tuple(deltas), r_last=tails[-1])


class ComponentArrays(NamedTuple):
    """Vectorized components for a sequence of points."""

    delta_r1: np.ndarray
    r2: np.ndarray
    r_total: np.ndarray
    y: np.ndarray
    y_hat: np.ndarray


def component_arrays(
    p: TwoStagePipeline, points: Sequence[TripletPoint]
) -> ComponentArrays:
    """Components for every point at once; elementwise identical to
    calling decompose point by point."""
    if not points:
        return ComponentArrays(*(np.zeros(0) for _ in range(5)))
    W = w_matrix(points)
    X = x_matrix(points)
    y = y_vector(points)
    mu2_x = p.mu2_hat.predict_batch(X)[:, 0]
    _, y_hat = pipeline_predict_batch(p, W)
    r2 = np.abs(y - mu2_x)
    r_total = np.abs(y - y_hat)
    return ComponentArrays(
        delta_r1=_guarded_delta_array(r2, r_total),
        r2=r2,
        r_total=r_total,
        y=y,
        y_hat=y_hat,
    )


def components_from_precomputed(
    y: np.ndarray, mu2_x: np.ndarray, mu2_xhat: np.ndarray
) -> ComponentArrays:
    """Components straight from stored stage predictions (no models)."""
    y = np.asarray(y, dtype=float)
    mu2_x = np.asarray(mu2_x, dtype=float)
    mu2_xhat = np.asarray(mu2_xhat, dtype=float)
    r2 = np.abs(y - mu2_x)
    r_total = np.abs(y - mu2_xhat)
    return ComponentArrays(
        delta_r1=_guarded_delta_array(r2, r_total),
        r2=r2,
        r_total=r_total,
        y=y,
        y_hat=mu2_xhat,
    )
