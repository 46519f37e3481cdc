"""Synthetic scenario generators: structural equations, shifts, moments."""

import math

import numpy as np
import pytest

from stagecp.core import x_matrix, y_vector, w_matrix
from stagecp.errors import InvalidSpec
from stagecp.predictors import fit_ols
from stagecp.synth import (
    AR1_SUPPORT,
    ScenarioSpec,
    generate,
    geometric_mixing_coefficients,
)


def arrays(points):
    return (
        w_matrix(points)[:, 0],
        x_matrix(points)[:, 0],
        y_vector(points),
    )


class TestDeterminism:
    @pytest.mark.parametrize(
        "scenario",
        [
            "iid-linear",
            "gradual-up",
            "rapid-down",
            "three-phase",
            "covariate-shift",
            "ar1-mixing",
        ],
    )
    def test_same_seed_bitwise_identical(self, scenario):
        spec = ScenarioSpec(scenario=scenario, length=1500, train_length=100, seed=17)
        a = generate(spec)
        b = generate(spec)
        for pa, pb in zip(a, b):
            assert pa.w[0] == pb.w[0]
            assert pa.x[0] == pb.x[0]
            assert pa.y == pb.y

    def test_different_seeds_differ(self):
        base = ScenarioSpec(scenario="iid-linear", length=50, train_length=10, seed=1)
        other = ScenarioSpec(scenario="iid-linear", length=50, train_length=10, seed=2)
        assert y_vector(generate(base)).tolist() != y_vector(generate(other)).tolist()


class TestStructure:
    def test_noiseless_exact_relations(self):
        spec = ScenarioSpec(
            scenario="iid-linear", length=100, train_length=10, noise_scale=0.0, seed=4
        )
        w, x, y = arrays(generate(spec))
        assert np.array_equal(x, 3.0 * w)
        assert np.array_equal(y, 4.0 * x)
        assert np.std(w) > 0

    def test_three_phase_upstream_recovery(self):
        spec = ScenarioSpec(
            scenario="three-phase", length=1600, train_length=200, seed=9
        )
        w, x, _ = arrays(generate(spec))
        lo, hi = 300, 700  # absolute indices of the upstream-shift phase
        model = fit_ols(w[lo:hi], x[lo:hi])
        n = hi - lo
        se_slope = 1.0 / math.sqrt(n)  # noise std 1, w std 1
        assert model.weights[0, 0] == pytest.approx(8.0, abs=3 * se_slope)
        assert model.intercept[0] == pytest.approx(1.0, abs=3 * se_slope)

    def test_three_phase_downstream_recovery(self):
        spec = ScenarioSpec(
            scenario="three-phase", length=1600, train_length=200, seed=10
        )
        _, x, y = arrays(generate(spec))
        seg = slice(1100, 1600)
        model = fit_ols(x[seg], y[seg])
        assert model.weights[0, 0] == pytest.approx(7.0, abs=0.05)
        assert model.intercept[0] == pytest.approx(5.0, abs=0.2)

    def test_covariate_shift_moments(self):
        spec = ScenarioSpec(
            scenario="covariate-shift", length=1600, train_length=200, seed=11
        )
        w, _, _ = arrays(generate(spec))
        phase = w[300:700]
        n = len(phase)
        assert phase.mean() == pytest.approx(3.0, abs=3 * 2.0 / math.sqrt(n))
        assert phase.std() == pytest.approx(2.0, abs=3 * 2.0 / math.sqrt(2 * n))
        last = w[1100:]
        assert last.mean() == pytest.approx(-3.0, abs=3 * 2.0 / math.sqrt(len(last)))

    def test_ar1_innovations_bounded(self):
        spec = ScenarioSpec(
            scenario="ar1-mixing", length=3000, train_length=100, seed=12
        )
        w, x, y = arrays(generate(spec))
        innovations = w[1:] - 0.8 * w[:-1]
        assert np.max(np.abs(innovations)) <= AR1_SUPPORT + 1e-12
        # Structural noises bounded too.
        assert np.max(np.abs(x - 3.0 * w)) <= AR1_SUPPORT + 1e-12
        assert np.max(np.abs(y - 4.0 * x)) <= AR1_SUPPORT + 1e-12

    def test_gradual_vs_rapid_increment(self):
        g = ScenarioSpec(scenario="gradual-up", length=400, train_length=100, seed=13)
        r = ScenarioSpec(scenario="rapid-up", length=400, train_length=100, seed=13)
        assert r.rate > g.rate

    def test_upstream_noise_grows_after_onset(self):
        spec = ScenarioSpec(
            scenario="rapid-up", length=700, train_length=200, seed=14
        )
        w, x, _ = arrays(generate(spec))
        nu = x - 3.0 * w
        early = np.std(nu[:200])
        late = np.std(nu[-100:])
        assert late > 3 * early

    def test_downstream_variant_shifts_second_stage(self):
        spec = ScenarioSpec(
            scenario="rapid-down", length=700, train_length=200, seed=15
        )
        w, x, y = arrays(generate(spec))
        nu1 = x - 3.0 * w
        nu2 = y - 4.0 * x
        assert np.std(nu1[-100:]) == pytest.approx(np.std(nu1[:200]), rel=0.5)
        assert np.std(nu2[-100:]) > 3 * np.std(nu2[:200])


class TestSpecValidation:
    def test_unknown_scenario(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec(scenario="bogus", length=100, train_length=10)

    def test_phase_bounds_checked(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec(scenario="three-phase", length=300, train_length=100)

    def test_train_length_inside_stream(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec(scenario="iid-linear", length=100, train_length=100)


def test_geometric_mixing_coefficients():
    phi = geometric_mixing_coefficients(5, 0.5)
    assert phi.tolist() == [0.5, 0.25, 0.125, 0.0625, 0.03125]
    assert all(a >= b for a, b in zip(phi, phi[1:]))
