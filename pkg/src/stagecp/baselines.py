"""Online comparison methods over a sliding window of full residuals.

All baselines share the same streaming contract as the stage-wise method:
warm the window with k observed residuals, then at each step emit an
interval around the pipeline prediction before absorbing the new point.
They differ only in how the threshold (or its level) is tracked:

  SC    fixed-level conformal quantile of the window
  WSC   weighted quantile with exponential recency weights
  ACI   conformal quantile at an online level alpha_t
  DtACI exponentially-weighted mixture of ACI experts over a step grid
  PID   threshold tracking plus a saturating integral correction
  OCID  ACI-style update with a decaying step size

SC and WSC are stateless beyond the window. DtACI, PID and OCID follow
their sources only to the depth needed for comparison; their remaining
constants are documented defaults, configurable at construction.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, EmptyScores
from .intervals import AbstentionPolicy, PredictionInterval, covers
from .quantiles import conformal_quantile, weighted_quantile

BASELINE_METHODS = ("sc", "wsc", "aci", "dtaci", "pid", "ocid")

# Step-size grid for the DtACI experts.
DTACI_GAMMAS = (0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.064, 0.128)


@dataclass(frozen=True)
class BaselineConfig:
    alpha: float = 0.1
    k: int = 100
    gamma: float = 0.01
    wsc_decay: float = 0.99
    dtaci_gammas: tuple[float, ...] = DTACI_GAMMAS
    dtaci_interval: int = 30
    pid_ki: float = 0.1
    pid_csat_scale: float = 0.5  # C_sat as a fraction of the initial width
    ocid_gamma0: float = 0.1
    ocid_decay: float = 0.1


@dataclass(frozen=True)
class BaselineStep:
    interval: PredictionInterval
    level: float  # alpha_t where the method tracks one, else nan


class _WindowedBaseline:
    """Common residual window handling."""

    method = "base"

    def __init__(self, config: BaselineConfig):
        self.config = config
        self.window: deque[float] = deque(maxlen=config.k)

    def observe(self, residual: float) -> None:
        self.window.append(residual)

    def window_full(self) -> bool:
        return len(self.window) >= self.config.k

    def _scores(self) -> np.ndarray:
        if not self.window:
            raise EmptyScores("baseline window is empty")
        return np.array(self.window)

    def step(self, r_new: float, y: float, y_hat: float) -> BaselineStep:
        raise NotImplementedError


class SplitConformal(_WindowedBaseline):
    method = "sc"

    def step(self, r_new: float, y: float, y_hat: float) -> BaselineStep:
        half = conformal_quantile(self._scores(), self.config.alpha)
        interval = PredictionInterval.symmetric(y_hat, half)
        self.observe(r_new)
        return BaselineStep(interval=interval, level=self.config.alpha)


class WeightedSplitConformal(_WindowedBaseline):
    method = "wsc"

    def step(self, r_new: float, y: float, y_hat: float) -> BaselineStep:
        scores = self._scores()
        ages = np.arange(len(scores) - 1, -1, -1, dtype=float)
        weights = self.config.wsc_decay**ages
        half = weighted_quantile(scores, weights, self.config.alpha)
        interval = PredictionInterval.symmetric(y_hat, half)
        self.observe(r_new)
        return BaselineStep(interval=interval, level=self.config.alpha)


class AdaptiveConformal(_WindowedBaseline):
    """Online level update alpha_{t+1} = alpha_t + gamma (alpha - err)."""

    method = "aci"

    def __init__(self, config: BaselineConfig):
        super().__init__(config)
        self.alpha_t = config.alpha

    def step(self, r_new: float, y: float, y_hat: float) -> BaselineStep:
        half = conformal_quantile(self._scores(), self.alpha_t)
        interval = PredictionInterval.symmetric(y_hat, half)
        level = self.alpha_t
        err = 0 if covers(interval, y, AbstentionPolicy.ALGORITHMIC) else 1
        self.alpha_t += self.config.gamma * (self.config.alpha - err)
        self.observe(r_new)
        return BaselineStep(interval=interval, level=level)


class DtACI(_WindowedBaseline):
    """Mixture of ACI experts, reweighted by pinball loss on the realized
    coverable level; the aggregated level is clipped to [0, 1]."""

    method = "dtaci"

    def __init__(self, config: BaselineConfig):
        super().__init__(config)
        alpha = config.alpha
        n = len(config.dtaci_gammas)
        horizon = config.dtaci_interval
        denom = (1 - alpha) ** 2 * alpha**3 + alpha**2 * (1 - alpha) ** 3
        self.mix_rate = math.sqrt(3.0 / horizon) * math.sqrt(
            (math.log(n * horizon) + 2.0) / denom
        )
        self.sigma = 1.0 / (2.0 * horizon)
        self.weights = np.ones(n) / n
        self.expert_alphas = np.full(n, alpha)
        self.gammas = np.asarray(config.dtaci_gammas)

    def aggregated_level(self) -> float:
        p = self.weights / self.weights.sum()
        return float(p @ self.expert_alphas)

    def step(self, r_new: float, y: float, y_hat: float) -> BaselineStep:
        scores = self._scores()
        raw_level = self.aggregated_level()
        level = min(max(raw_level, 0.0), 1.0)
        half = conformal_quantile(scores, level)
        interval = PredictionInterval.symmetric(y_hat, half)

        # Largest level whose interval would still have covered this point.
        m = len(scores)
        beta = 1.0 - float((scores < r_new).sum()) / (m + 1.0)
        alpha = self.config.alpha
        diffs = beta - self.expert_alphas
        pinball = alpha * diffs - np.minimum(0.0, diffs)
        bar = self.weights * np.exp(-self.mix_rate * pinball)
        bar_sum = bar.sum()
        n = len(bar)
        if bar_sum > 0:
            self.weights = (1.0 - self.sigma) * bar / bar_sum + self.sigma / n
        else:
            self.weights = np.ones(n) / n
        expert_err = (self.expert_alphas > beta).astype(float)
        self.expert_alphas = self.expert_alphas + self.gammas * (alpha - expert_err)
        self.observe(r_new)
        return BaselineStep(interval=interval, level=raw_level)


class ConformalPid(_WindowedBaseline):
    """Threshold tracker with a tanh-saturated integral term.

    q_{t+1} = q_t + lr (err - alpha), lr scaled by the initial window's
    residual magnitude; the emitted threshold adds
    C_sat * tanh(KI * sum(err - alpha)). With KI = 0 and C_sat = 0 this is
    pure quantile tracking.
    """

    method = "pid"

    def __init__(self, config: BaselineConfig):
        super().__init__(config)
        self.q_t: Optional[float] = None
        self.lr: Optional[float] = None
        self.csat: Optional[float] = None
        self.accumulator = 0.0

    def _init_from_window(self, scores: np.ndarray) -> None:
        base = conformal_quantile(scores, self.config.alpha)
        if not math.isfinite(base) or base <= 0:
            base = float(scores.max()) if scores.max() > 0 else 1.0
        self.q_t = base
        self.lr = self.config.gamma * base
        self.csat = self.config.pid_csat_scale * base

    def step(self, r_new: float, y: float, y_hat: float) -> BaselineStep:
        scores = self._scores()
        if self.q_t is None:
            self._init_from_window(scores)
        half = self.q_t + self.csat * math.tanh(
            self.config.pid_ki * self.accumulator
        )
        half = max(half, 0.0)
        interval = PredictionInterval.symmetric(y_hat, half)
        err = 0 if covers(interval, y, AbstentionPolicy.ALGORITHMIC) else 1
        self.q_t += self.lr * (err - self.config.alpha)
        self.accumulator += err - self.config.alpha
        self.observe(r_new)
        return BaselineStep(interval=interval, level=math.nan)


class DecayingOnlineConformal(_WindowedBaseline):
    """ACI-style level update with step gamma0 * (t+1)^-(1/2 + decay)."""

    method = "ocid"

    def __init__(self, config: BaselineConfig):
        super().__init__(config)
        self.alpha_t = config.alpha
        self.t = 0

    def step(self, r_new: float, y: float, y_hat: float) -> BaselineStep:
        half = conformal_quantile(self._scores(), self.alpha_t)
        interval = PredictionInterval.symmetric(y_hat, half)
        level = self.alpha_t
        err = 0 if covers(interval, y, AbstentionPolicy.ALGORITHMIC) else 1
        rate = self.config.ocid_gamma0 * (self.t + 1) ** -(
            0.5 + self.config.ocid_decay
        )
        self.alpha_t += rate * (self.config.alpha - err)
        self.t += 1
        self.observe(r_new)
        return BaselineStep(interval=interval, level=level)


_BASELINES = {
    cls.method: cls
    for cls in (
        SplitConformal,
        WeightedSplitConformal,
        AdaptiveConformal,
        DtACI,
        ConformalPid,
        DecayingOnlineConformal,
    )
}


def make_baseline(method: str, config: BaselineConfig) -> _WindowedBaseline:
    if method not in _BASELINES:
        raise ConfigError(f"unknown baseline method: {method}")
    return _BASELINES[method](config)


def baseline_step(
    baseline: _WindowedBaseline, r_new: float, y: float, y_hat: float
) -> BaselineStep:
    """One streaming step: interval for the new point, then absorb it."""
    return baseline.step(r_new, y, y_hat)
