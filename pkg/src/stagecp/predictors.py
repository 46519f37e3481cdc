"""Two-stage predictor abstraction and ordinary-least-squares fitting.

A pipeline is a pair of stage models: mu1 maps upstream features w to the
intermediate representation x, mu2 maps x to the scalar target y. Stage
models are deterministic and immutable once constructed; fitting is
symmetric (invariant to row permutations of the training data).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, RankDeficient

# Singular values below RANK_RTOL * largest are treated as zero.
RANK_RTOL = 1e-10


class StageModel:
    """Deterministic map from a real vector to a real vector."""

    in_dim: int | None = None
    out_dim: int | None = None

    def predict_batch(self, inputs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, v: np.ndarray) -> np.ndarray:
        """Single-vector prediction; shares the batch code path so scalar
        and vectorized uses are bit-identical."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return self.predict_batch(v[None, :])[0]


@dataclass(frozen=True)
class LinearModel(StageModel):
    """Affine map fitted by least squares: v -> v @ weights + intercept."""

    weights: np.ndarray  # (in_dim, out_dim)
    intercept: np.ndarray  # (out_dim,)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[1]

    def predict_batch(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim != 2 or inputs.shape[1] != self.in_dim:
            raise DimensionMismatch(
                f"expected (*, {self.in_dim}) inputs, got {inputs.shape}"
            )
        return inputs @ self.weights + self.intercept


@dataclass(frozen=True)
class IdentityModel(StageModel):
    """Passes its input through unchanged."""

    def predict_batch(self, inputs: np.ndarray) -> np.ndarray:
        return np.asarray(inputs, dtype=float)


@dataclass(frozen=True)
class ConstantModel(StageModel):
    """Ignores its input and returns a fixed vector."""

    value: np.ndarray

    def predict_batch(self, inputs: np.ndarray) -> np.ndarray:
        value = np.atleast_1d(np.asarray(self.value, dtype=float))
        return np.tile(value, (len(inputs), 1))


@dataclass(frozen=True)
class PrecomputedModel(StageModel):
    """Lookup of stored per-time-index outputs.

    Inputs are 1-d vectors whose first entry is the integer time index.
    Used to wrap external model predictions ingested from file, so the
    conformal layer runs without refitting those models.
    """

    table: Mapping[int, float]

    def predict_batch(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float)
        out = np.empty((len(inputs), 1))
        for i, row in enumerate(inputs):
            key = int(row[0])
            if key not in self.table:
                raise DimensionMismatch(f"no stored prediction for index {key}")
            out[i, 0] = self.table[key]
        return out


@dataclass(frozen=True)
class TwoStagePipeline:
    """Composed predictor mu2(mu1(w))."""

    mu1_hat: StageModel
    mu2_hat: StageModel


def fit_ols(
    inputs: Sequence[np.ndarray] | np.ndarray,
    targets: Sequence[np.ndarray] | np.ndarray,
) -> LinearModel:
    """Least-squares fit with an intercept column, solved via SVD.

    Raises RankDeficient when the intercept-augmented design matrix is
    numerically singular (smallest singular value < 1e-10 x largest).
    """
    X = np.asarray(inputs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d = X.shape
    if Y.shape[0] != n:
        raise DimensionMismatch(f"{n} inputs but {Y.shape[0]} targets")
    if n < d + 1:
        raise RankDeficient(f"need at least {d + 1} rows, got {n}")
    design = np.hstack([X, np.ones((n, 1))])
    svals = np.linalg.svd(design, compute_uv=False)
    if svals[-1] < RANK_RTOL * svals[0]:
        raise RankDeficient("design matrix is numerically singular")
    coef, _, _, _ = np.linalg.lstsq(design, Y, rcond=None)
    return LinearModel(weights=coef[:d].copy(), intercept=coef[d].copy())


def predict_pipeline(p: TwoStagePipeline, w: np.ndarray) -> tuple[np.ndarray, float]:
    """Run both stages: returns (x_hat, y_hat)."""
    x_hat = p.mu1_hat.predict(w)
    y_hat = p.mu2_hat.predict(x_hat)
    return x_hat, float(y_hat[0])


def predict_given_x(p: TwoStagePipeline, x: np.ndarray) -> float:
    """Downstream prediction from the true intermediate input."""
    return float(p.mu2_hat.predict(x)[0])


def pipeline_predict_batch(
    p: TwoStagePipeline, W: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (x_hat, y_hat) over rows of W."""
    X_hat = p.mu1_hat.predict_batch(W)
    Y_hat = p.mu2_hat.predict_batch(X_hat)
    return X_hat, Y_hat[:, 0]
