"""Online risk-controlled intervals with sliding-window recalibration.

Each step recomputes component quantiles over the older half of a length-k
window, re-runs the FWER test over the scaling grid at the current level
alpha_t against the recent half, picks a scaling pair from the validated
set, and then nudges (alpha_t, c_t, d_t) from the observed coverage:

  alpha_{t+1} = alpha_t + gamma * (alpha - err_t),   err_t = 1 - cov_t
  c_{t+1}     = c_t + eta * dc_t,  dc_t in {-1, 0, +1}   (same for d)

Conventions that the long-run coverage argument relies on, implemented
here exactly: an empty validated set abstains and counts as covered; a
level alpha_t above 1 degenerates to an empty interval and counts as a
miss; the component-excess signal is ReLU(component - threshold), which
is 0 whenever the threshold is infinite. Together these keep
alpha_t in [-gamma, 1+gamma] and c_t, d_t in [-eta, 1+eta] on every
trajectory.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import TripletPoint
from .errors import WindowTooShort
from .intervals import PredictionInterval, covers, AbstentionPolicy, scaled_term
from .predictors import TwoStagePipeline, predict_pipeline
from .quantiles import conformal_quantile
from .residuals import component_arrays, decompose
from .risk_control import LambdaGrid, accepted_lambda

# Float-safe guard for "c_t already at or above 1" in the tightening rule.
_ONE = 1.0 + 1e-12


@dataclass(frozen=True)
class ComponentCoverage:
    """Coverage indicator plus per-component threshold excesses."""

    cov: int
    cov_dr1: float
    cov_r2: float


def relu_excess(value: float, threshold: float) -> float:
    """ReLU(value - threshold); 0 when the threshold is infinite."""
    if math.isinf(threshold):
        return 0.0
    return max(0.0, value - threshold)


def component_coverage(
    delta_r1: float,
    r2: float,
    dr1_threshold: float,
    r2_threshold: float,
    interval: PredictionInterval,
    y: float,
) -> ComponentCoverage:
    """Coverage signals for one step: the interval indicator under the
    algorithmic policy and the ReLU excesses of each component."""
    cov = 1 if covers(interval, y, AbstentionPolicy.ALGORITHMIC) else 0
    return ComponentCoverage(
        cov=cov,
        cov_dr1=relu_excess(delta_r1, dr1_threshold),
        cov_r2=relu_excess(r2, r2_threshold),
    )


def update_alpha(alpha_t: float, cov: int, gamma: float, target_alpha: float) -> float:
    """One step of the online level update (err form)."""
    err = 1 - cov
    return alpha_t + gamma * (target_alpha - err)


@dataclass(frozen=True)
class LambdaSelection:
    a: float
    b: float
    delta_c: int
    delta_d: int


def select_lambda_adaptive(
    lambda_val: Sequence[tuple[float, float]],
    prev_ab: tuple[float, float],
    mean_dr1: float,
    mean_r2: float,
    prev_cov: ComponentCoverage,
    dr1_window_clean: bool,
    r2_window_clean: bool,
    c_t: float,
    d_t: float,
) -> LambdaSelection:
    """Pick the next scaling pair and quantile-level signals.

    Covered step: keep the previous pair if still validated, else move to
    the nearest validated pair; tighten a level (+1) only after a full
    window of zero excess on its component, and never past 1. Missed
    step: raise the scaling of the dominant component if a larger
    validated candidate exists; otherwise widen that component's quantile
    (-1), which is only permitted when its excess was positive, so a zero
    excess always yields a nonnegative level update.
    """
    a_prev, b_prev = prev_ab
    delta_c = 0
    delta_d = 0

    if prev_cov.cov == 1:
        if (a_prev, b_prev) in lambda_val:
            a, b = a_prev, b_prev
        elif lambda_val:
            a, b = min(
                lambda_val,
                key=lambda ab: (
                    (ab[0] - a_prev) ** 2 + (ab[1] - b_prev) ** 2,
                    -(ab[0] + ab[1]),
                    -ab[0],
                ),
            )
        else:
            a, b = a_prev, b_prev
        if dr1_window_clean and c_t <= _ONE:
            delta_c = 1
        if r2_window_clean and d_t <= _ONE:
            delta_d = 1
        return LambdaSelection(a=a, b=b, delta_c=delta_c, delta_d=delta_d)

    if mean_dr1 > mean_r2:
        larger = [ab for ab in lambda_val if ab[0] > a_prev]
        if larger:
            a, b = min(larger, key=lambda ab: (ab[0], ab[1]))
        else:
            if prev_cov.cov_dr1 > 0:
                delta_c = -1
            a, b = lambda_val[0] if lambda_val else (a_prev, b_prev)
    else:
        larger = [ab for ab in lambda_val if ab[1] > b_prev]
        if larger:
            a, b = min(larger, key=lambda ab: (ab[1], ab[0]))
        else:
            if prev_cov.cov_r2 > 0:
                delta_d = -1
            a, b = lambda_val[0] if lambda_val else (a_prev, b_prev)
    return LambdaSelection(a=a, b=b, delta_c=delta_c, delta_d=delta_d)


@dataclass(frozen=True)
class AdaptiveConfig:
    """Static parameters of the online method."""

    alpha: float = 0.1
    gamma: float = 0.01
    eta: float = 0.01
    k: int = 100
    conf_ratio: float = 0.5
    delta: float = 0.1
    tau: float = 0.0
    c0: float = 0.01
    d0: float = 0.01
    a0: float = 1.0
    b0: float = 1.0
    fwer_method: str = "fixed-sequence"
    grid: LambdaGrid = field(default_factory=LambdaGrid.default)


@dataclass(frozen=True)
class StepDiagnostics:
    """One record per online step (consumed by the experiment harness)."""

    t: int
    lo: float
    hi: float
    covered_algorithmic: bool
    covered_reporting: bool
    width: float
    a: float
    b: float
    c: float
    d: float
    alpha_t: float
    abstained: bool
    mean_dr1: float
    mean_r2: float
    mean_r: float


class AdaptiveState:
    """Mutable state of the online method: current levels, the sliding
    window of residual components, and the last step's coverage signals."""

    def __init__(self, config: AdaptiveConfig):
        self.config = config
        self.alpha_t = config.alpha
        self.c_t = config.c0
        self.d_t = config.d0
        self.a_prev = config.a0
        self.b_prev = config.b0
        k = config.k
        self.win_dr1: deque[float] = deque(maxlen=k)
        self.win_r2: deque[float] = deque(maxlen=k)
        self.win_r: deque[float] = deque(maxlen=k)
        self.dr1_excess: deque[float] = deque(maxlen=k)
        self.r2_excess: deque[float] = deque(maxlen=k)
        self.prev_coverage = ComponentCoverage(cov=1, cov_dr1=0.0, cov_r2=0.0)

    def observe(self, delta_r1: float, r2: float, r_total: float) -> None:
        """Push one observed point's components into the window."""
        self.win_dr1.append(delta_r1)
        self.win_r2.append(r2)
        self.win_r.append(r_total)

    def window_full(self) -> bool:
        return len(self.win_dr1) >= self.config.k

    def _window_clean(self, excess: deque[float]) -> bool:
        return len(excess) == self.config.k and all(v == 0.0 for v in excess)

    def step(
        self,
        t: int,
        delta_r1: float,
        r2: float,
        r_total: float,
        y: float,
        y_hat: float,
    ) -> tuple[PredictionInterval, StepDiagnostics]:
        """Run one online step against the new point, then absorb it."""
        cfg = self.config
        if not self.window_full():
            raise WindowTooShort(
                f"window holds {len(self.win_dr1)} points, need {cfg.k}"
            )
        dr1_arr = np.array(self.win_dr1)
        r2_arr = np.array(self.win_r2)
        r_arr = np.array(self.win_r)
        # Both window halves must be nonempty for quantiles and testing.
        n_conf = min(max(int(round(cfg.k * cfg.conf_ratio)), 1), cfg.k - 1)
        q_dr1 = conformal_quantile(dr1_arr[:n_conf], self.c_t)
        q_r2 = conformal_quantile(r2_arr[:n_conf], self.d_t)
        if self.alpha_t < 0.0:
            # A negative target is un-certifiable regardless of tolerance;
            # abstaining here is what pushes alpha_t back above -gamma.
            lambda_val: tuple[tuple[float, float], ...] = ()
        else:
            lambda_val = accepted_lambda(
                cfg.grid,
                q_dr1,
                q_r2,
                r_arr[n_conf:],
                level=self.alpha_t,
                tau=cfg.tau,
                delta=cfg.delta,
                method=cfg.fwer_method,
            )
        mean_dr1 = float(dr1_arr.mean())
        mean_r2 = float(r2_arr.mean())
        selection = select_lambda_adaptive(
            lambda_val,
            (self.a_prev, self.b_prev),
            mean_dr1,
            mean_r2,
            self.prev_coverage,
            self._window_clean(self.dr1_excess),
            self._window_clean(self.r2_excess),
            self.c_t,
            self.d_t,
        )

        forced_miss = self.alpha_t > 1.0
        if forced_miss:
            # Level above 1 admits no interval: degenerate to a point and
            # count a miss, mirroring the covered-abstention convention.
            interval = PredictionInterval(y_hat, y_hat, y_hat)
        elif not lambda_val:
            interval = PredictionInterval.symmetric(y_hat, math.inf)
        else:
            half = scaled_term(selection.a, q_dr1) + scaled_term(selection.b, q_r2)
            interval = PredictionInterval.symmetric(y_hat, half)

        signals = component_coverage(delta_r1, r2, q_dr1, q_r2, interval, y)
        if forced_miss:
            signals = ComponentCoverage(
                cov=0, cov_dr1=signals.cov_dr1, cov_r2=signals.cov_r2
            )

        record = StepDiagnostics(
            t=t,
            lo=interval.lo,
            hi=interval.hi,
            covered_algorithmic=bool(signals.cov),
            covered_reporting=covers(interval, y, AbstentionPolicy.REPORTING),
            width=interval.width,
            a=selection.a,
            b=selection.b,
            c=self.c_t,
            d=self.d_t,
            alpha_t=self.alpha_t,
            abstained=interval.abstained,
            mean_dr1=mean_dr1,
            mean_r2=mean_r2,
            mean_r=float(r_arr.mean()),
        )

        self.alpha_t = update_alpha(self.alpha_t, signals.cov, cfg.gamma, cfg.alpha)
        self.c_t = self.c_t + cfg.eta * selection.delta_c
        self.d_t = self.d_t + cfg.eta * selection.delta_d
        self.a_prev = selection.a
        self.b_prev = selection.b
        self.dr1_excess.append(signals.cov_dr1)
        self.r2_excess.append(signals.cov_r2)
        self.prev_coverage = signals
        self.observe(delta_r1, r2, r_total)
        return interval, record


def adaptive_step(
    state: AdaptiveState, pipeline: TwoStagePipeline, point: TripletPoint
) -> tuple[PredictionInterval, AdaptiveState, StepDiagnostics]:
    """Single online step from a raw point (components computed here)."""
    comps = decompose(pipeline, point)
    _, y_hat = predict_pipeline(pipeline, point.w)
    t = point.t if point.t is not None else 0
    interval, record = state.step(
        t, comps.delta_r1, comps.r2, comps.r_total, point.y, y_hat
    )
    return interval, state, record


def run_adaptive(
    pipeline: TwoStagePipeline,
    points: Sequence[TripletPoint],
    config: AdaptiveConfig,
    state: Optional[AdaptiveState] = None,
) -> tuple[list[StepDiagnostics], AdaptiveState]:
    """Stream through points: the first k warm the window, the rest each
    get an interval before being absorbed."""
    if state is None:
        state = AdaptiveState(config)
    if len(points) <= config.k:
        raise WindowTooShort(
            f"stream of {len(points)} cannot fill a window of {config.k}"
        )
    comps = component_arrays(pipeline, points)
    records: list[StepDiagnostics] = []
    for i, point in enumerate(points):
        if state.window_full():
            t = point.t if point.t is not None else i
            _, record = state.step(
                t,
                float(comps.delta_r1[i]),
                float(comps.r2[i]),
                float(comps.r_total[i]),
                float(comps.y[i]),
                float(comps.y_hat[i]),
            )
            records.append(record)
        else:
            state.observe(
                float(comps.delta_r1[i]),
                float(comps.r2[i]),
                float(comps.r_total[i]),
            )
    return records, state
