"""Stage-wise conformal prediction for two-stage sequential models.

Decomposes pipeline residuals into upstream and downstream components,
builds prediction intervals from component quantiles, selects interval
scaling parameters under family-wise error control, and adapts all of it
online under distribution shift. Includes the standard conformal
baselines, synthetic shift generators, and a CLI experiment harness.
"""

from .core import (
    AuxiliaryPoint,
    Seed,
    SplitDataset,
    TripletPoint,
    make_rng,
    sliding_window,
    split_dataset,
)
from .predictors import (
    ConstantModel,
    IdentityModel,
    LinearModel,
    PrecomputedModel,
    StageModel,
    TwoStagePipeline,
    fit_ols,
    predict_given_x,
    predict_pipeline,
)
from .residuals import (
    MultiStageComponents,
    ResidualComponents,
    SignedResidualComponents,
    component_arrays,
    decompose,
    decompose_aux,
    decompose_multistage,
    decompose_signed,
)
from .quantiles import conformal_quantile, weighted_quantile
from .intervals import (
    AbstentionPolicy,
    PredictionInterval,
    ScalingConfig,
    covers,
    interval_separate,
    interval_signed,
    interval_split_conformal,
    interval_unified,
)
from .risk_control import (
    CalibrationVerdict,
    LambdaGrid,
    binomial_p_value,
    bonferroni,
    calibrate_grid,
    empirical_risk,
    fixed_sequence_test,
    mixing_p_value,
    select_lambda_nonadaptive,
)
from .adaptive import (
    AdaptiveConfig,
    AdaptiveState,
    ComponentCoverage,
    adaptive_step,
    component_coverage,
    run_adaptive,
    select_lambda_adaptive,
    update_alpha,
)
from .baselines import BaselineConfig, baseline_step, make_baseline
from .synth import ScenarioSpec, generate, geometric_mixing_coefficients
from .experiments import ExperimentConfig, MetricsSummary, run_experiment, sweep

__version__ = "0.1.0"
