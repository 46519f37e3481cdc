"""Interval builders: reduction identities, abstention policies, coverage."""

import math

import numpy as np
import pytest

from stagecp.core import TripletPoint
from stagecp.errors import EmptyScores
from stagecp.intervals import (
    AbstentionPolicy,
    PredictionInterval,
    ScalingConfig,
    covers,
    interval_separate,
    interval_signed,
    interval_split_conformal,
    interval_unified,
)
from stagecp.predictors import IdentityModel, LinearModel, TwoStagePipeline


def affine(slope, intercept=0.0):
    return LinearModel(weights=np.array([[slope]]), intercept=np.array([intercept]))


def make_pipeline():
    return TwoStagePipeline(mu1_hat=affine(3.0), mu2_hat=affine(4.0))


def conf_from_values(values):
    """Points whose full residual equals the given values: identity
    stages, w = x = 0, y = value."""
    p = TwoStagePipeline(mu1_hat=IdentityModel(), mu2_hat=IdentityModel())
    pts = [
        TripletPoint(w=np.zeros(1), x=np.zeros(1), y=float(v)) for v in values
    ]
    return p, pts


def conf_from_components(dr1_values, r2_values):
    """Points with exact (dR1, R2): mu2 identity, mu1 maps w to the stored
    end-to-end prediction. y = 0, mu2(x) = -r2, mu2(xhat) = -(r2 + dr1)."""
    pts = []
    for dr1, r2 in zip(dr1_values, r2_values):
        pts.append(
            TripletPoint(w=np.array([-(r2 + dr1)]), x=np.array([-r2]), y=0.0)
        )
    p = TwoStagePipeline(mu1_hat=IdentityModel(), mu2_hat=IdentityModel())
    return p, pts


class TestCovers:
    def test_inside_outside(self):
        iv = PredictionInterval(center=1.0, lo=0.0, hi=2.0)
        assert covers(iv, 1.0)
        assert covers(iv, 0.0) and covers(iv, 2.0)
        assert not covers(iv, 3.0)

    def test_abstained_policies(self):
        iv = PredictionInterval.symmetric(0.0, math.inf)
        assert iv.abstained
        assert covers(iv, 123.0, AbstentionPolicy.ALGORITHMIC)
        assert not covers(iv, 123.0, AbstentionPolicy.REPORTING)


class TestSplitConformal:
    def test_zero_residuals(self):
        p, pts = conf_from_values([0.0] * 20)
        iv = interval_split_conformal(p, pts, 0.1, np.array([5.0]))
        assert iv.half_width == 0.0
        assert iv.center == 5.0

    def test_known_order_statistic(self):
        p, pts = conf_from_values(range(1, 10))
        iv = interval_split_conformal(p, pts, 0.1, np.array([0.0]))
        assert iv.half_width == 9.0

    def test_small_conf_abstains(self):
        p, pts = conf_from_values([1.0, 2.0, 3.0, 4.0])
        iv = interval_split_conformal(p, pts, 0.1, np.array([0.0]))
        assert iv.abstained

    def test_empty_conf(self):
        p, _ = conf_from_values([1.0])
        with pytest.raises(EmptyScores):
            interval_split_conformal(p, [], 0.1, np.array([0.0]))


class TestSeparateAndUnified:
    def test_separate_known_values(self):
        p, pts = conf_from_components([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])
        iv = interval_separate(p, pts, 0.25, 0.25, np.array([0.0]))
        # m=3, k=ceil(4*0.75)=3: third smallest of each component.
        assert iv.half_width == 9.0

    def test_zero_dr1_reduces_to_r2_quantile(self):
        p, pts = conf_from_components([0.0] * 9, range(1, 10))
        iv = interval_separate(p, pts, 0.1, 0.1, np.array([0.0]))
        assert iv.half_width == 9.0

    def test_unified_reduces_to_separate(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            m = int(rng.integers(3, 40))
            p, pts = conf_from_components(
                rng.exponential(size=m), rng.exponential(size=m)
            )
            c, d = rng.uniform(0.0, 0.6, size=2)
            w = np.array([rng.normal()])
            unified = interval_unified(
                p, pts, ScalingConfig(a=1.0, b=1.0, c=c, d=d), w
            )
            separate = interval_separate(p, pts, c, d, w)
            assert unified == separate

    def test_masked_component(self):
        p, pts = conf_from_components([100.0] * 9, list(range(1, 10)))
        iv = interval_unified(
            p, pts, ScalingConfig(a=0.0, b=1.0, c=0.1, d=0.1), np.zeros(1)
        )
        assert iv.half_width == 9.0

    def test_masked_component_with_infinite_quantile(self):
        # c too small for m=4 drives the dR1 quantile to +inf; a=0 masks it.
        p, pts = conf_from_components([1.0] * 4, [2.0] * 4)
        iv = interval_unified(
            p, pts, ScalingConfig(a=0.0, b=1.0, c=0.01, d=0.5), np.zeros(1)
        )
        assert iv.half_width == 2.0

    def test_degenerate_point_interval(self):
        p, pts = conf_from_components([1.0] * 9, [2.0] * 9)
        iv = interval_unified(
            p, pts, ScalingConfig(a=0.0, b=0.0, c=0.1, d=0.1), np.zeros(1)
        )
        assert iv.half_width == 0.0
        assert iv.lo == iv.hi == iv.center

    def test_width_monotone_in_scales_and_levels(self):
        rng = np.random.default_rng(15)
        p, pts = conf_from_components(
            rng.exponential(size=30), rng.exponential(size=30)
        )
        w = np.zeros(1)

        def half(a, b, c, d):
            return interval_unified(p, pts, ScalingConfig(a, b, c, d), w).half_width

        for _ in range(200):
            a, b = rng.uniform(0, 1, size=2)
            c, d = rng.uniform(0.05, 0.9, size=2)
            da, db = rng.uniform(0, 1 - a), rng.uniform(0, 1 - b)
            dc, dd = rng.uniform(0, 0.9 - c + 0.05), rng.uniform(0, 0.9 - d + 0.05)
            assert half(a + da, b, c, d) >= half(a, b, c, d)
            assert half(a, b + db, c, d) >= half(a, b, c, d)
            assert half(a, b, c + dc, d) <= half(a, b, c, d)
            assert half(a, b, c, d + dd) <= half(a, b, c, d)


class TestSignedInterval:
    def test_degenerate_point(self):
        p, pts = conf_from_components([1.0] * 9, [2.0] * 9)
        iv = interval_signed(
            p, pts, ScalingConfig(a=0.0, b=0.0, c=0.2, d=0.2), np.zeros(1)
        )
        assert iv.lo == iv.hi == iv.center

    def test_symmetric_scores_nearly_symmetric_interval(self):
        # r2_signed symmetric around 0, dr1 contribution masked.
        values = [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]
        pts = [TripletPoint(w=np.zeros(1), x=np.zeros(1), y=v) for v in values]
        p = TwoStagePipeline(mu1_hat=IdentityModel(), mu2_hat=IdentityModel())
        iv = interval_signed(
            p, pts, ScalingConfig(a=0.0, b=1.0, c=0.2, d=0.2), np.zeros(1)
        )
        assert iv.lo == -iv.hi

    def test_two_tail_brute_force(self):
        # Hand-built conf of size 9 with known signed components.
        r2s = [-2.0, -1.0, 1.0, 2.0, 3.0, -3.0, 0.5, -0.5, 0.0]
        pts = [TripletPoint(w=np.zeros(1), x=np.zeros(1), y=v) for v in r2s]
        p = TwoStagePipeline(mu1_hat=IdentityModel(), mu2_hat=IdentityModel())
        iv = interval_signed(
            p, pts, ScalingConfig(a=1.0, b=1.0, c=0.2, d=0.2), np.zeros(1)
        )
        # dr1_signed is identically 0; tails at d/2=0.1: k=ceil(10*0.9)=9.
        ordered = sorted(r2s)
        assert iv.hi == ordered[8]
        assert iv.lo == ordered[0]

    def test_insufficient_tail_data_abstains(self):
        p, pts = conf_from_components([1.0] * 5, [2.0] * 5)
        iv = interval_signed(
            p, pts, ScalingConfig(a=1.0, b=1.0, c=0.05, d=0.05), np.zeros(1)
        )
        assert iv.abstained


class TestTheoremOneEmpirically:
    def test_separate_interval_coverage_iid(self):
        # Linear data, c=d=0.05: coverage >= 1-c-d within 3 binomial se.
        rng = np.random.default_rng(2718)
        c = d = 0.05
        hits = 0
        total = 0
        for _ in range(10):
            w = rng.normal(0, 1, size=400)
            x = 3 * w + rng.normal(0, 0.5, size=400)
            y = 4 * x + rng.normal(0, 0.5, size=400)
            pts = [
                TripletPoint(w=np.array([wi]), x=np.array([xi]), y=float(yi))
                for wi, xi, yi in zip(w, x, y)
            ]
            p = make_pipeline()
            conf, test = pts[:200], pts[200:]
            iv_width = interval_separate(
                p, conf, c, d, np.zeros(1)
            ).half_width
            for point in test:
                pred = 12.0 * point.w[0]
                hits += abs(point.y - pred) <= iv_width
                total += 1
        se = math.sqrt((c + d) * (1 - c - d) / total)
        assert hits / total >= 1 - c - d - 3 * se

    def test_unit_scaling_coverage_matches_corollary(self):
        # a=b=1 with c=d=alpha keeps the 1-2*alpha guarantee.
        rng = np.random.default_rng(1414)
        alpha = 0.05
        hits = 0
        total = 0
        for _ in range(10):
            w = rng.normal(0, 1, size=400)
            x = 3 * w + rng.normal(0, 0.5, size=400)
            y = 4 * x + rng.normal(0, 0.5, size=400)
            pts = [
                TripletPoint(w=np.array([wi]), x=np.array([xi]), y=float(yi))
                for wi, xi, yi in zip(w, x, y)
            ]
            conf, test = pts[:200], pts[200:]
            cfg = ScalingConfig(a=1.0, b=1.0, c=alpha, d=alpha)
            width = interval_unified(make_pipeline(), conf, cfg, np.zeros(1)).half_width
            for point in test:
                hits += abs(point.y - 12.0 * point.w[0]) <= width
                total += 1
        se = math.sqrt(2 * alpha * (1 - 2 * alpha) / total)
        assert hits / total >= 1 - 2 * alpha - 3 * se
