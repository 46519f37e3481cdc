"""Seeded generators for the synthetic shift scenarios.

Every scenario shares the linear backbone x = 3w + nu1, y = 4x + nu2 and
differs in what drifts over time:

  iid-linear       stationary throughout
  gradual-up/down  noise std of one stage grows linearly after onset
  rapid-up/down    same, with a 10x larger growth rate
  three-phase      upstream slope shift, reversion, downstream slope shift
  covariate-shift  the distribution of w jumps between phases
  ar1-mixing       w follows a stationary AR(1) with bounded uniform noise

Noise scales are standard deviations. Shift onsets are indexed relative
to the end of the stationary training prefix, so models fitted on that
prefix face the drift at "test time". Identical seeds reproduce the
stream bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Seed, TripletPoint, make_rng
from .errors import InvalidSpec

SCENARIOS = (
    "iid-linear",
    "gradual-up",
    "rapid-up",
    "gradual-down",
    "rapid-down",
    "three-phase",
    "covariate-shift",
    "ar1-mixing",
)

# Per-step relative growth of the shifted stage's noise std. Tuned so the
# gradual variant degrades the fixed-width baselines without forcing
# abstention, while the rapid variant overwhelms early-shift calibration.
GRADUAL_RATE = 0.002
RAPID_RATE = 0.008

# Phase offsets (relative to the train prefix) for the staged scenarios.
PHASE_OFFSETS = (100, 500, 900)

UPSTREAM_SLOPE = 3.0
DOWNSTREAM_SLOPE = 4.0
SHIFT_UPSTREAM = (8.0, 1.0)  # slope, intercept after the upstream shift
SHIFT_DOWNSTREAM = (7.0, 5.0)  # slope, intercept after the downstream shift

AR1_COEFFICIENT = 0.8
AR1_SUPPORT = 0.5  # innovations uniform on [-AR1_SUPPORT, AR1_SUPPORT]
AR1_BURN_IN = 100


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one synthetic stream."""

    scenario: str = "iid-linear"
    length: int = 800
    train_length: int = 200
    noise_scale: Optional[float] = None  # std of nu1/nu2; scenario default
    input_scale: Optional[float] = None  # std of w; scenario default
    shift_start: Optional[int] = None  # default: end of the train prefix
    shift_rate: Optional[float] = None  # default per gradual/rapid tag
    phase_offsets: tuple[int, int, int] = PHASE_OFFSETS
    seed: Seed = 0

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidSpec(f"unknown scenario: {self.scenario}")
        if self.length <= 0 or self.train_length < 0:
            raise InvalidSpec("length must be positive, train_length nonnegative")
        if self.train_length >= self.length:
            raise InvalidSpec("train_length must leave room for test points")
        onset = self.onset
        if not (0 <= onset <= self.length):
            raise InvalidSpec(f"shift start {onset} outside [0, {self.length}]")
        if self.scenario in ("three-phase", "covariate-shift"):
            bounds = [onset + off for off in self.phase_offsets]
            if any(b > self.length for b in bounds):
                raise InvalidSpec("phase boundaries exceed the stream length")
            if list(bounds) != sorted(bounds):
                raise InvalidSpec("phase offsets must be increasing")

    @property
    def onset(self) -> int:
        return self.train_length if self.shift_start is None else self.shift_start

    @property
    def base_noise(self) -> float:
        if self.noise_scale is not None:
            return self.noise_scale
        if self.scenario in ("three-phase", "covariate-shift"):
            return 1.0
        if self.scenario == "ar1-mixing":
            return AR1_SUPPORT
        return 0.1

    @property
    def base_input(self) -> float:
        if self.input_scale is not None:
            return self.input_scale
        if self.scenario in ("three-phase", "covariate-shift"):
            return 1.0
        return 0.1

    @property
    def rate(self) -> float:
        if self.shift_rate is not None:
            return self.shift_rate
        return RAPID_RATE if self.scenario.startswith("rapid") else GRADUAL_RATE


def default_length(scenario: str, train_length: int) -> int:
    """Stream length giving every scenario its full schedule."""
    if scenario in ("three-phase", "covariate-shift"):
        return train_length + PHASE_OFFSETS[-1] + 400
    return train_length + 600


def _noise_factors(spec: ScenarioSpec, n: int) -> np.ndarray:
    """Multiplier of the shifted stage's noise std at each index."""
    t = np.arange(n)
    growth = np.maximum(0, t - spec.onset + 1) * spec.rate
    return 1.0 + growth


def generate(spec: ScenarioSpec) -> list[TripletPoint]:
    """Materialize the stream for a spec; deterministic in the seed."""
    rng = make_rng(spec.seed)
    n = spec.length
    s = spec.base_noise
    scen = spec.scenario

    if scen == "ar1-mixing":
        u = rng.uniform(-AR1_SUPPORT, AR1_SUPPORT, size=n + AR1_BURN_IN)
        w = np.empty(n + AR1_BURN_IN)
        w[0] = u[0]
        for i in range(1, len(w)):
            w[i] = AR1_COEFFICIENT * w[i - 1] + u[i]
        w = w[AR1_BURN_IN:]
        nu1 = rng.uniform(-s, s, size=n)
        nu2 = rng.uniform(-s, s, size=n)
        x = UPSTREAM_SLOPE * w + nu1
        y = DOWNSTREAM_SLOPE * x + nu2
        return _pack(w, x, y)

    nu1 = rng.normal(0.0, 1.0, size=n)
    nu2 = rng.normal(0.0, 1.0, size=n)

    if scen == "covariate-shift":
        w = rng.normal(0.0, 1.0, size=n)
        b1, b2, b3 = (spec.onset + off for off in spec.phase_offsets)
        w[b1:b2] = 3.0 + 2.0 * w[b1:b2]
        w[b3:] = -3.0 + 2.0 * w[b3:]
        x = UPSTREAM_SLOPE * w + s * nu1
        y = DOWNSTREAM_SLOPE * x + s * nu2
        return _pack(w, x, y)

    if scen == "three-phase":
        w = rng.normal(0.0, spec.base_input, size=n)
        b1, b2, b3 = (spec.onset + off for off in spec.phase_offsets)
        x = UPSTREAM_SLOPE * w + s * nu1
        up_slope, up_icept = SHIFT_UPSTREAM
        x[b1:b2] = up_slope * w[b1:b2] + up_icept + s * nu1[b1:b2]
        y = DOWNSTREAM_SLOPE * x + s * nu2
        dn_slope, dn_icept = SHIFT_DOWNSTREAM
        y[b3:] = dn_slope * x[b3:] + dn_icept + s * nu2[b3:]
        return _pack(w, x, y)

    w = rng.normal(0.0, spec.base_input, size=n)
    if scen == "iid-linear":
        x = UPSTREAM_SLOPE * w + s * nu1
        y = DOWNSTREAM_SLOPE * x + s * nu2
    elif scen in ("gradual-up", "rapid-up"):
        f = _noise_factors(spec, n)
        x = UPSTREAM_SLOPE * w + s * f * nu1
        y = DOWNSTREAM_SLOPE * x + s * nu2
    elif scen in ("gradual-down", "rapid-down"):
        f = _noise_factors(spec, n)
        x = UPSTREAM_SLOPE * w + s * nu1
        y = DOWNSTREAM_SLOPE * x + s * f * nu2
    else:
        raise InvalidSpec(f"unknown scenario: {scen}")
    return _pack(w, x, y)


def _pack(w: np.ndarray, x: np.ndarray, y: np.ndarray) -> list[TripletPoint]:
    return [
        TripletPoint(w=np.array([wi]), x=np.array([xi]), y=float(yi), t=i)
        for i, (wi, xi, yi) in enumerate(zip(w, x, y))
    ]


def geometric_mixing_coefficients(n: int, ratio: float = AR1_COEFFICIENT) -> np.ndarray:
    """Geometric phi-mixing coefficient sequence ratio^i, i = 1..n."""
    return ratio ** np.arange(1, n + 1)
