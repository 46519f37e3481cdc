"""Experiment runner: batch and online protocols over synthetic or
ingested data, repeated across seeds, with aggregated metrics.

Batch protocol (non-adaptive methods): fit both stages on a contiguous
training prefix, take component quantiles on the conformal slice, select
scaling parameters on the calibration slice, then score a held-out test
slice. The synthetic shift scenarios begin drifting right after the
training prefix, so conformal and calibration data are early-shift and
the test slice is deepest into the shift.

Online protocol: after the training prefix, every method slides a
length-k window over the stream, emitting one interval per step.

All repetitions reuse one seed sequence, so two runs with the same seed
are identical byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .adaptive import AdaptiveConfig, AdaptiveState
from .baselines import BASELINE_METHODS, BaselineConfig, make_baseline
from .core import Seed, TripletPoint, spawn_seeds, split_dataset
from .errors import ConfigError
from .intervals import AbstentionPolicy, PredictionInterval
from .predictors import TwoStagePipeline, fit_ols
from .quantiles import conformal_quantile, weighted_quantile
from .residuals import ComponentArrays, component_arrays
from .risk_control import (
    LambdaGrid,
    calibrate_grid,
    select_lambda_nonadaptive,
)
from .synth import SCENARIOS, ScenarioSpec, default_length, generate

BATCH_METHODS = ("sr-ab", "sr-cd", "sc", "wsc")
ONLINE_METHODS = ("sr-adaptive",) + BASELINE_METHODS
SR_METHODS = ("sr-ab", "sr-cd", "sr-adaptive")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; every field maps to a CLI flag."""

    scenario: str = "iid-linear"
    input_path: Optional[str] = None
    input_schema: str = "raw"
    protocol: str = ""  # "batch", "online", or "" to infer from methods
    methods: tuple[str, ...] = ()
    alpha: float = 0.1
    delta: float = 0.1
    tau: float = 0.0
    gamma: float = 0.01
    eta: float = 0.01
    k: int = 100
    c: float = 0.01
    d: float = 0.01
    conf_ratio: float = 0.5
    repetitions: int = 1
    seed: Seed = 0
    policy: str = "reporting"
    outdir: str = "results"
    n_train: int = 200
    n_conf: int = 150
    n_cal: int = 150
    n_test: int = 250
    length: Optional[int] = None
    noise_scale: Optional[float] = None
    input_scale: Optional[float] = None
    shift_rate: Optional[float] = None
    shift_start: Optional[int] = None
    metrics_window: int = 200
    grid_steps: int = 10
    fwer: str = "fixed-sequence"

    def resolved_protocol(self) -> str:
        if self.protocol:
            return self.protocol
        methods = self.resolved_methods_raw()
        if any(m in ONLINE_METHODS and m not in BATCH_METHODS for m in methods):
            return "online"
        return "batch"

    def resolved_methods_raw(self) -> tuple[str, ...]:
        if self.methods:
            return self.methods
        if self.protocol == "online":
            return ("sr-adaptive", "aci", "pid", "ocid")
        return ("sr-ab", "sr-cd", "sc", "wsc")

    def validate(self) -> "ExperimentConfig":
        if not (0.0 < self.alpha < 1.0):
            raise ConfigError(f"alpha must be in (0,1), got {self.alpha}")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"delta must be in (0,1), got {self.delta}")
        if self.tau < 0:
            raise ConfigError(f"tau must be nonnegative, got {self.tau}")
        if self.gamma < 0 or self.eta < 0:
            raise ConfigError("step sizes gamma and eta must be nonnegative")
        if not (0.0 < self.conf_ratio < 1.0):
            raise ConfigError(f"conf_ratio must be in (0,1), got {self.conf_ratio}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.k < 2:
            raise ConfigError("window length k must be >= 2")
        if self.input_path is None and self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario: {self.scenario}")
        if self.input_schema not in ("raw", "precomputed"):
            raise ConfigError(f"unknown input schema: {self.input_schema}")
        if self.policy not in ("reporting", "algorithmic"):
            raise ConfigError(f"unknown abstention policy: {self.policy}")
        protocol = self.resolved_protocol()
        if protocol not in ("batch", "online"):
            raise ConfigError(f"unknown protocol: {protocol}")
        if (
            self.input_path is not None
            and self.input_schema == "precomputed"
            and protocol == "batch"
        ):
            raise ConfigError(
                "precomputed inputs carry a pre-fit pipeline; use the online protocol"
            )
        allowed = BATCH_METHODS if protocol == "batch" else ONLINE_METHODS
        for m in self.resolved_methods_raw():
            if m not in allowed:
                raise ConfigError(
                    f"method {m!r} not available under the {protocol} protocol"
                )
        return self

    @property
    def abstention_policy(self) -> AbstentionPolicy:
        return AbstentionPolicy(self.policy)


@dataclass(frozen=True)
class StepRow:
    """One emitted interval; the unit of the results CSV."""

    t: int
    method: str
    lo: float
    hi: float
    covered_reporting: bool
    covered_algorithmic: bool
    width: float
    a: float = math.nan
    b: float = math.nan
    c: float = math.nan
    d: float = math.nan
    alpha_t: float = math.nan
    abstained: bool = False
    mean_dr1: float = math.nan
    mean_r2: float = math.nan
    mean_r: float = math.nan

    def covered(self, policy: AbstentionPolicy) -> bool:
        if policy is AbstentionPolicy.ALGORITHMIC:
            return self.covered_algorithmic
        return self.covered_reporting


@dataclass(frozen=True)
class MethodMetrics:
    method: str
    coverage_reporting: float
    coverage_reporting_std: float
    coverage_algorithmic: float
    coverage_algorithmic_std: float
    width_mean: float
    width_std: float
    abstained_steps: int
    total_steps: int

    @property
    def all_abstained(self) -> bool:
        return self.total_steps > 0 and self.abstained_steps == self.total_steps


@dataclass(frozen=True)
class MetricsSummary:
    methods: dict[str, MethodMetrics]
    sliding: dict[str, np.ndarray]  # per-method mean sliding-window coverage
    improvements: dict[str, tuple[float, float]]  # vs-baseline max gain

    def any_sr_fully_abstained(self) -> bool:
        return any(
            m.all_abstained for name, m in self.methods.items() if name in SR_METHODS
        )


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    per_rep_rows: list[list[StepRow]]
    summary: MetricsSummary


def fit_stages(train: Sequence[TripletPoint]) -> TwoStagePipeline:
    """OLS fits for both stages on the training slice."""
    W = np.stack([p.w for p in train])
    X = np.stack([p.x for p in train])
    y = np.array([p.y for p in train])
    return TwoStagePipeline(mu1_hat=fit_ols(W, X), mu2_hat=fit_ols(X, y))


def _scenario_spec(config: ExperimentConfig, seed: Seed) -> ScenarioSpec:
    protocol = config.resolved_protocol()
    if config.length is not None:
        length = config.length
    elif protocol == "batch":
        length = config.n_train + config.n_conf + config.n_cal + config.n_test
    else:
        length = default_length(config.scenario, config.n_train)
    return ScenarioSpec(
        scenario=config.scenario,
        length=length,
        train_length=config.n_train,
        noise_scale=config.noise_scale,
        input_scale=config.input_scale,
        shift_rate=config.shift_rate,
        shift_start=config.shift_start,
        seed=seed,
    )


def _constant_width_rows(
    method: str,
    test: ComponentArrays,
    t_values: Sequence[int],
    half: float,
    extras: dict,
) -> list[StepRow]:
    rows = []
    for i, t in enumerate(t_values):
        interval = PredictionInterval.symmetric(float(test.y_hat[i]), half)
        y = float(test.y[i])
        covered = interval.lo <= y <= interval.hi if not interval.abstained else False
        rows.append(
            StepRow(
                t=t,
                method=method,
                lo=interval.lo,
                hi=interval.hi,
                covered_reporting=False if interval.abstained else covered,
                covered_algorithmic=True if interval.abstained else covered,
                width=interval.width,
                abstained=interval.abstained,
                **extras,
            )
        )
    return rows


def _run_batch_rep(
    config: ExperimentConfig, points: Sequence[TripletPoint], grid: LambdaGrid
) -> dict[str, list[StepRow]]:
    needed = config.n_train + config.n_conf + config.n_cal
    if needed >= len(points):
        raise ConfigError(
            f"splits need {needed} points plus a test slice, have {len(points)}"
        )
    splits = split_dataset(points, config.n_train, config.n_conf, config.n_cal)
    test_points = points[needed:]
    pipeline = fit_stages(splits.train)
    conf = component_arrays(pipeline, splits.conf)
    cal = component_arrays(pipeline, splits.cal)
    test = component_arrays(pipeline, test_points)
    t_values = [p.t if p.t is not None else needed + i for i, p in enumerate(test_points)]

    out: dict[str, list[StepRow]] = {}
    for method in config.resolved_methods_raw():
        if method == "sc":
            half = conformal_quantile(conf.r_total, config.alpha)
            rows = _constant_width_rows(
                method, test, t_values, half, {"alpha_t": config.alpha}
            )
        elif method == "wsc":
            ages = np.arange(len(conf.r_total) - 1, -1, -1, dtype=float)
            half = weighted_quantile(conf.r_total, 0.99**ages, config.alpha)
            rows = _constant_width_rows(
                method, test, t_values, half, {"alpha_t": config.alpha}
            )
        elif method == "sr-cd":
            half = conformal_quantile(conf.delta_r1, config.c) + conformal_quantile(
                conf.r2, config.d
            )
            rows = _constant_width_rows(
                method,
                test,
                t_values,
                half,
                {"a": 1.0, "b": 1.0, "c": config.c, "d": config.d},
            )
        elif method == "sr-ab":
            q_dr1 = conformal_quantile(conf.delta_r1, config.c)
            q_r2 = conformal_quantile(conf.r2, config.d)
            verdict = calibrate_grid(
                grid,
                q_dr1,
                q_r2,
                cal.r_total,
                level=config.alpha,
                tau=config.tau,
                delta=config.delta,
                method=config.fwer,
            )
            selected = select_lambda_nonadaptive(verdict, conf.r_total, config.alpha)
            half = math.inf if selected is None else selected.width
            extras = {
                "a": math.nan if selected is None else selected.a,
                "b": math.nan if selected is None else selected.b,
                "c": config.c,
                "d": config.d,
                "alpha_t": config.alpha,
            }
            rows = _constant_width_rows(method, test, t_values, half, extras)
        else:
            raise ConfigError(f"method {method!r} is not a batch method")
        out[method] = rows
    return out


def _run_online_rep(
    config: ExperimentConfig, points: Sequence[TripletPoint], grid: LambdaGrid
) -> dict[str, list[StepRow]]:
    if config.n_train + config.k >= len(points):
        raise ConfigError(
            f"online run needs more than {config.n_train + config.k} points"
        )
    train = points[: config.n_train]
    stream = points[config.n_train :]
    pipeline = fit_stages(train)
    return run_online_stream(config, pipeline, stream, grid)


def run_online_stream(
    config: ExperimentConfig,
    pipeline: TwoStagePipeline,
    stream: Sequence[TripletPoint],
    grid: Optional[LambdaGrid] = None,
) -> dict[str, list[StepRow]]:
    """Run every requested online method over one shared stream."""
    if grid is None:
        grid = LambdaGrid.default(config.grid_steps)
    comps = component_arrays(pipeline, stream)
    t_values = [
        p.t if p.t is not None else i for i, p in enumerate(stream)
    ]
    out: dict[str, list[StepRow]] = {}
    for method in config.resolved_methods_raw():
        if method == "sr-adaptive":
            out[method] = _run_adaptive_stream(config, comps, t_values, grid)
        elif method in BASELINE_METHODS:
            out[method] = _run_baseline_stream(config, comps, t_values, method)
        else:
            raise ConfigError(f"method {method!r} is not an online method")
    return out


def _run_adaptive_stream(
    config: ExperimentConfig,
    comps: ComponentArrays,
    t_values: Sequence[int],
    grid: LambdaGrid,
) -> list[StepRow]:
    acfg = AdaptiveConfig(
        alpha=config.alpha,
        gamma=config.gamma,
        eta=config.eta,
        k=config.k,
        conf_ratio=config.conf_ratio,
        delta=config.delta,
        tau=config.tau,
        c0=config.c,
        d0=config.d,
        fwer_method=config.fwer,
        grid=grid,
    )
    state = AdaptiveState(acfg)
    rows: list[StepRow] = []
    for i in range(len(t_values)):
        dr1 = float(comps.delta_r1[i])
        r2 = float(comps.r2[i])
        r = float(comps.r_total[i])
        if state.window_full():
            _, rec = state.step(
                t_values[i], dr1, r2, r, float(comps.y[i]), float(comps.y_hat[i])
            )
            rows.append(
                StepRow(
                    t=rec.t,
                    method="sr-adaptive",
                    lo=rec.lo,
                    hi=rec.hi,
                    covered_reporting=rec.covered_reporting,
                    covered_algorithmic=rec.covered_algorithmic,
                    width=rec.width,
                    a=rec.a,
                    b=rec.b,
                    c=rec.c,
                    d=rec.d,
                    alpha_t=rec.alpha_t,
                    abstained=rec.abstained,
                    mean_dr1=rec.mean_dr1,
                    mean_r2=rec.mean_r2,
                    mean_r=rec.mean_r,
                )
            )
        else:
            state.observe(dr1, r2, r)
    return rows


def _run_baseline_stream(
    config: ExperimentConfig,
    comps: ComponentArrays,
    t_values: Sequence[int],
    method: str,
) -> list[StepRow]:
    bcfg = BaselineConfig(alpha=config.alpha, k=config.k, gamma=config.gamma)
    baseline = make_baseline(method, bcfg)
    rows: list[StepRow] = []
    for i in range(len(t_values)):
        r = float(comps.r_total[i])
        if baseline.window_full():
            y = float(comps.y[i])
            step = baseline.step(r, y, float(comps.y_hat[i]))
            interval = step.interval
            covered = (
                interval.lo <= y <= interval.hi if not interval.abstained else False
            )
            rows.append(
                StepRow(
                    t=t_values[i],
                    method=method,
                    lo=interval.lo,
                    hi=interval.hi,
                    covered_reporting=False if interval.abstained else covered,
                    covered_algorithmic=True if interval.abstained else covered,
                    width=interval.width,
                    alpha_t=step.level,
                    abstained=interval.abstained,
                )
            )
        else:
            baseline.observe(r)
    return rows


def sliding_coverage(
    rows: Sequence[StepRow], window: int, policy: AbstentionPolicy
) -> np.ndarray:
    """Trailing-window mean coverage at each step (window clipped at the
    start of the series)."""
    flags = np.array([1.0 if r.covered(policy) else 0.0 for r in rows])
    if flags.size == 0:
        return flags
    cums = np.concatenate([[0.0], np.cumsum(flags)])
    idx = np.arange(1, flags.size + 1)
    lo = np.maximum(0, idx - window)
    return (cums[idx] - cums[lo]) / (idx - lo)


def summarize(
    config: ExperimentConfig, per_rep: list[dict[str, list[StepRow]]]
) -> MetricsSummary:
    policy = config.abstention_policy
    methods = config.resolved_methods_raw()
    metrics: dict[str, MethodMetrics] = {}
    sliding: dict[str, np.ndarray] = {}
    slides_by_method: dict[str, list[np.ndarray]] = {m: [] for m in methods}

    for method in methods:
        cov_rep, cov_alg, widths = [], [], []
        abstained = 0
        total = 0
        for rep in per_rep:
            rows = rep[method]
            total += len(rows)
            abstained += sum(1 for r in rows if r.abstained)
            if rows:
                cov_rep.append(
                    float(np.mean([r.covered_reporting for r in rows]))
                )
                cov_alg.append(
                    float(np.mean([r.covered_algorithmic for r in rows]))
                )
                finite = [r.width for r in rows if math.isfinite(r.width)]
                widths.append(float(np.mean(finite)) if finite else math.nan)
                slides_by_method[method].append(
                    sliding_coverage(rows, config.metrics_window, policy)
                )
        metrics[method] = MethodMetrics(
            method=method,
            coverage_reporting=_mean(cov_rep),
            coverage_reporting_std=_std(cov_rep),
            coverage_algorithmic=_mean(cov_alg),
            coverage_algorithmic_std=_std(cov_alg),
            width_mean=_mean(widths),
            width_std=_std(widths),
            abstained_steps=abstained,
            total_steps=total,
        )
        series = slides_by_method[method]
        if series and all(len(s) == len(series[0]) for s in series):
            sliding[method] = np.mean(np.stack(series), axis=0)
        else:
            sliding[method] = np.zeros(0)

    improvements: dict[str, tuple[float, float]] = {}
    sr_present = [m for m in methods if m in SR_METHODS]
    if sr_present:
        sr = sr_present[0]
        for method in methods:
            if method == sr or method in SR_METHODS:
                continue
            gains = []
            for rep_idx in range(len(per_rep)):
                s_sr = slides_by_method[sr][rep_idx]
                s_b = slides_by_method[method][rep_idx]
                if len(s_sr) and len(s_sr) == len(s_b):
                    gains.append(float(np.max(s_sr - s_b)))
            if gains:
                improvements[method] = (_mean(gains), _std(gains))
    return MetricsSummary(methods=metrics, sliding=sliding, improvements=improvements)


def _mean(values: list[float]) -> float:
    values = [v for v in values if not math.isnan(v)]
    return float(np.mean(values)) if values else math.nan


def _std(values: list[float]) -> float:
    values = [v for v in values if not math.isnan(v)]
    return float(np.std(values)) if values else math.nan


def run_experiment(
    config: ExperimentConfig,
    data: Optional[Sequence[TripletPoint]] = None,
    pipeline: Optional[TwoStagePipeline] = None,
) -> ExperimentResult:
    """Execute all requested methods over every repetition.

    When `data` is given (ingested from file) the repetitions all use it;
    synthetic scenarios draw fresh streams per repetition from spawned
    seeds. A pre-fit pipeline skips stage fitting (precomputed inputs).
    """
    config = config.validate()
    protocol = config.resolved_protocol()
    grid = LambdaGrid.default(config.grid_steps)
    seeds = spawn_seeds(config.seed, config.repetitions)
    per_rep: list[dict[str, list[StepRow]]] = []
    for rep, rep_seed in enumerate(seeds):
        if data is not None:
            points = data
        else:
            points = generate(_scenario_spec(config, rep_seed))
        if pipeline is not None:
            rep_out = run_online_stream(config, pipeline, points, grid)
        elif protocol == "batch":
            rep_out = _run_batch_rep(config, points, grid)
        else:
            rep_out = _run_online_rep(config, points, grid)
        per_rep.append(rep_out)
    rows_per_rep = [
        [row for m in config.resolved_methods_raw() for row in rep[m]]
        for rep in per_rep
    ]
    summary = summarize(config, per_rep)
    return ExperimentResult(
        config=config, per_rep_rows=rows_per_rep, summary=summary
    )


SWEEPABLE = ("tau", "delta", "gamma", "eta", "k")


def sweep(
    config: ExperimentConfig, param: str, values: Sequence[float]
) -> list[tuple[float, ExperimentResult]]:
    """Re-run the experiment for each value of one hyperparameter,
    sharing seeds across values."""
    if param not in SWEEPABLE:
        raise ConfigError(f"sweep parameter must be one of {SWEEPABLE}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    results = []
    for value in values:
        cast = int(value) if param == "k" else float(value)
        results.append((value, run_experiment(replace(config, **{param: cast}))))
    return results
