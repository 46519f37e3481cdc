"""Residual decomposition identities and the triangle-bound invariants."""

import numpy as np
import pytest

from stagecp.core import AuxiliaryPoint, TripletPoint
from stagecp.errors import TooFewStages
from stagecp.predictors import (
    ConstantModel,
    IdentityModel,
    LinearModel,
    TwoStagePipeline,
)
from stagecp.residuals import (
    component_arrays,
    decompose,
    decompose_aux,
    decompose_multistage,
    decompose_signed,
)


def affine(slope, intercept=0.0):
    return LinearModel(weights=np.array([[slope]]), intercept=np.array([intercept]))


def pipeline_with_values(y, mu2_x, mu2_xhat):
    """One-point pipeline arranged so mu2(x) and mu2(mu1(w)) hit the given
    values exactly: mu2 is the identity, mu1 maps w to mu2_xhat."""
    point = TripletPoint(w=np.array([0.0]), x=np.array([mu2_x]), y=y)
    p = TwoStagePipeline(
        mu1_hat=ConstantModel(value=np.array([mu2_xhat])),
        mu2_hat=IdentityModel(),
    )
    return p, point


def random_pipeline_and_point(rng):
    slope1, slope2 = rng.normal(size=2) * 3
    icept1, icept2 = rng.normal(size=2)
    p = TwoStagePipeline(
        mu1_hat=affine(slope1, icept1), mu2_hat=affine(slope2, icept2)
    )
    point = TripletPoint(
        w=rng.normal(size=1) * 2, x=rng.normal(size=1) * 2, y=float(rng.normal() * 5)
    )
    return p, point


class TestDecompose:
    def test_worked_values(self):
        p, point = pipeline_with_values(y=10.0, mu2_x=9.0, mu2_xhat=7.0)
        comps = decompose(p, point)
        assert comps.r_total == 3.0
        assert comps.r2 == 1.0
        assert comps.delta_r1 == 2.0
        assert comps.r_total <= comps.delta_r1 + comps.r2

    def test_identity_upstream(self):
        p = TwoStagePipeline(mu1_hat=IdentityModel(), mu2_hat=affine(4.0))
        point = TripletPoint(w=np.array([2.0]), x=np.array([2.0]), y=9.0)
        comps = decompose(p, point)
        assert comps.delta_r1 == 0.0
        assert comps.r2 == comps.r_total

    def test_all_zero(self):
        p, point = pipeline_with_values(y=5.0, mu2_x=5.0, mu2_xhat=5.0)
        comps = decompose(p, point)
        assert (comps.r_total, comps.delta_r1, comps.r2) == (0.0, 0.0, 0.0)

    def test_triangle_bound_fuzzed(self):
        rng = np.random.default_rng(2024)
        for _ in range(10_000):
            p, point = random_pipeline_and_point(rng)
            comps = decompose(p, point)
            assert comps.r_total <= comps.delta_r1 + comps.r2
            assert min(comps.r_total, comps.delta_r1, comps.r2) >= 0.0

    def test_majority_component(self):
        # One component always carries at least half the total error.
        rng = np.random.default_rng(77)
        for _ in range(2_000):
            p, point = random_pipeline_and_point(rng)
            comps = decompose(p, point)
            assert max(comps.delta_r1, comps.r2) >= comps.r_total / 2.0

    def test_small_r2_makes_delta_close_to_total(self):
        # If r2 <= eps < r_total then |delta_r1 - r_total| <= eps.
        rng = np.random.default_rng(99)
        checked = 0
        while checked < 500:
            p, point = random_pipeline_and_point(rng)
            comps = decompose(p, point)
            eps = comps.r2 + 1e-12
            if eps < comps.r_total:
                assert abs(comps.delta_r1 - comps.r_total) <= eps
                checked += 1

    def test_lipschitz_bound_on_r2(self):
        # Linear mu2 with |slope| = L and |x - mu1(w)| < delta gives
        # |r2 - r_total| <= L * delta.
        rng = np.random.default_rng(41)
        for _ in range(500):
            slope2 = float(rng.normal() * 3)
            p = TwoStagePipeline(
                mu1_hat=affine(float(rng.normal())), mu2_hat=affine(slope2)
            )
            point = TripletPoint(
                w=rng.normal(size=1), x=rng.normal(size=1), y=float(rng.normal())
            )
            comps = decompose(p, point)
            gap = abs(point.x[0] - p.mu1_hat.predict(point.w)[0])
            assert abs(comps.r2 - comps.r_total) <= abs(slope2) * gap + 1e-9


class TestDecomposeSigned:
    def test_worked_values(self):
        p, point = pipeline_with_values(y=10.0, mu2_x=9.0, mu2_xhat=7.0)
        signed = decompose_signed(p, point)
        assert signed.r2_signed == 1.0
        assert signed.delta_r1_signed == -2.0
        assert signed.r2_signed - signed.delta_r1_signed == 3.0

    def test_perfect_predictions(self):
        p, point = pipeline_with_values(y=4.0, mu2_x=4.0, mu2_xhat=4.0)
        signed = decompose_signed(p, point)
        assert (signed.r2_signed, signed.delta_r1_signed) == (0.0, 0.0)

    def test_constant_downstream_kills_delta(self):
        p = TwoStagePipeline(
            mu1_hat=affine(2.0), mu2_hat=ConstantModel(value=np.array([1.0]))
        )
        point = TripletPoint(w=np.array([3.0]), x=np.array([-1.0]), y=2.0)
        signed = decompose_signed(p, point)
        assert signed.delta_r1_signed == 0.0

    def test_sum_identity_fuzzed(self):
        rng = np.random.default_rng(8)
        for _ in range(2_000):
            p, point = random_pipeline_and_point(rng)
            signed = decompose_signed(p, point)
            x_hat = p.mu1_hat.predict(point.w)
            full = point.y - float(p.mu2_hat.predict(x_hat)[0])
            assert signed.r2_signed - signed.delta_r1_signed == pytest.approx(
                full, abs=1e-12
            )


class TestDecomposeAux:
    def test_aux_ignored_matches_plain(self):
        # Downstream weights zero out the auxiliary block.
        mu2_aux = LinearModel(
            weights=np.array([[4.0], [0.0]]), intercept=np.array([0.5])
        )
        mu2 = affine(4.0, 0.5)
        p = TwoStagePipeline(mu1_hat=affine(3.0), mu2_hat=mu2)
        base = TripletPoint(w=np.array([1.0]), x=np.array([2.0]), y=11.0)
        aux_point = AuxiliaryPoint(base=base, x_aux=np.array([9.0]))
        x_hat = p.mu1_hat.predict(base.w)
        assert decompose_aux(mu2_aux, aux_point, x_hat) == decompose(p, base)

    def test_exact_upstream_zeroes_delta(self):
        mu2_aux = LinearModel(
            weights=np.array([[2.0], [1.0]]), intercept=np.zeros(1)
        )
        base = TripletPoint(w=np.array([1.0]), x=np.array([5.0]), y=3.0)
        aux_point = AuxiliaryPoint(base=base, x_aux=np.array([0.5]))
        comps = decompose_aux(mu2_aux, aux_point, x_hat=base.x)
        assert comps.delta_r1 == 0.0

    def test_worked_values(self):
        # y=5, mu2(x,x')=4, mu2(xhat,x')=1 -> R=4, R2=1, dR1=3.
        mu2_aux = IdentityModel()
        base = TripletPoint(w=np.array([0.0]), x=np.array([4.0]), y=5.0)
        aux_point = AuxiliaryPoint(base=base, x_aux=np.zeros(0))
        comps = decompose_aux(mu2_aux, aux_point, x_hat=np.array([1.0]))
        assert (comps.r_total, comps.r2, comps.delta_r1) == (4.0, 1.0, 3.0)


class TestDecomposeMultistage:
    def test_two_stage_matches_decompose(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            p, point = random_pipeline_and_point(rng)
            comps = decompose(p, point)
            multi = decompose_multistage(
                [p.mu1_hat, p.mu2_hat], [point.w, point.x, np.array([point.y])]
            )
            assert multi.deltas == (comps.delta_r1,)
            assert multi.r_last == comps.r2

    def test_identity_chain_all_zero(self):
        stages = [IdentityModel(), IdentityModel(), IdentityModel()]
        chain = [np.array([2.0])] * 4
        multi = decompose_multistage(stages, chain)
        assert multi.deltas == (0.0, 0.0)
        assert multi.r_last == 0.0

    def test_three_stage_against_brute_force(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            slopes = rng.normal(size=3) * 2
            icepts = rng.normal(size=3)
            stages = [affine(s, i) for s, i in zip(slopes, icepts)]
            chain = [rng.normal(size=1) for _ in range(3)] + [rng.normal(size=1)]
            multi = decompose_multistage(stages, chain)

            # Brute-force oracle: evaluate nested compositions directly.
            def run_from(i):
                v = float(chain[i - 1][0])
                for s, c in zip(slopes[i - 1 :], icepts[i - 1 :]):
                    v = s * v + c
                return v

            target = float(chain[-1][0])
            errs = [abs(target - run_from(i)) for i in (1, 2, 3)]
            expected_deltas = (abs(errs[1] - errs[0]), abs(errs[2] - errs[1]))
            assert multi.deltas == pytest.approx(expected_deltas, abs=1e-12)
            assert multi.r_last == pytest.approx(errs[2], abs=1e-12)
            full = errs[0]
            assert full <= sum(multi.deltas) + multi.r_last + 1e-12

    def test_too_few_stages(self):
        with pytest.raises(TooFewStages):
            decompose_multistage([IdentityModel()], [np.zeros(1), np.zeros(1)])
        with pytest.raises(TooFewStages):
            decompose_multistage(
                [IdentityModel(), IdentityModel()], [np.zeros(1)] * 4
            )


class TestComponentArrays:
    def test_matches_pointwise_decompose(self):
        rng = np.random.default_rng(64)
        p = TwoStagePipeline(mu1_hat=affine(3.0, 0.2), mu2_hat=affine(4.0, -0.1))
        pts = [
            TripletPoint(w=rng.normal(size=1), x=rng.normal(size=1), y=float(rng.normal()))
            for _ in range(50)
        ]
        arrays = component_arrays(p, pts)
        for i, point in enumerate(pts):
            comps = decompose(p, point)
            assert arrays.delta_r1[i] == comps.delta_r1
            assert arrays.r2[i] == comps.r2
            assert arrays.r_total[i] == comps.r_total
