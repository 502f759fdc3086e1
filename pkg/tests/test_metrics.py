import math

import numpy as np
import pytest

from alphastream.metrics import GroundTruth, aggregate, bh_offline, score_stream


def brute_force_step_up(pvalues, alpha):
    """Independent enumeration of the step-up rule: try every k from n down
    and reject all p <= p_(k) for the largest feasible k."""
    p = list(pvalues)
    n = len(p)
    sp = sorted(p)
    for k in range(n, 0, -1):
        if sp[k - 1] <= k * alpha / n:
            threshold = sp[k - 1]
            return sorted(i for i, x in enumerate(p) if x <= threshold)
    return []


class TestScoreStream:
    def test_no_rejections_fdp_zero(self):
        truth = GroundTruth([True, True, True])
        rep = score_stream([False, False, False], truth)
        assert rep.fdp == 0.0 and rep.v == 0 and rep.r == 0
        assert rep.sup_fdp == 0.0

    def test_half_false(self):
        truth = GroundTruth([True, True, False, False, False])
        rep = score_stream([True, True, True, True, False], truth)
        assert rep.v == 2 and rep.r == 4
        assert rep.fdp == pytest.approx(0.5)

    def test_running_sup_path(self):
        # reject a null at t=1 then a non-null at t=2: FDP path (1.0, 0.5)
        truth = GroundTruth([True, False])
        rep = score_stream([True, True], truth)
        assert rep.fdp == pytest.approx(0.5)
        assert rep.sup_fdp == pytest.approx(1.0)

    def test_power_denominator_guard(self):
        truth = GroundTruth([True, True])  # no non-nulls
        rep = score_stream([True, False], truth)
        assert rep.power == 0.0
        assert rep.n_nonnull == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            score_stream([True], GroundTruth([True, False]))

    def test_permutation_covariance(self):
        rng = np.random.default_rng(0)
        rej = rng.random(40) < 0.3
        truth = GroundTruth(rng.random(40) < 0.6)
        base = score_stream(rej, truth)
        for _ in range(10):
            order = rng.permutation(40)
            moved = score_stream(rej[order], truth.permuted(order))
            assert moved.v == base.v and moved.r == base.r
            assert moved.fdp == base.fdp
            assert moved.power == base.power


class TestAggregate:
    def test_empty_rejections(self):
        truth = GroundTruth([True, False])
        reports = [score_stream([False, False], truth) for _ in range(5)]
        agg = aggregate(reports)
        assert agg.fdr == 0.0 and agg.power == 0.0 and agg.fwer == 0.0

    def test_mean_of_fdps(self):
        t1 = GroundTruth([False])
        t2 = GroundTruth([True, False])
        r1 = score_stream([True], t1)               # FDP 0
        r2 = score_stream([True, True], t2)         # FDP 0.5
        agg = aggregate([r1, r2])
        assert agg.fdr == pytest.approx(0.25)

    def test_mfdr_ratio_of_means(self):
        t = GroundTruth([True, True, False])
        r1 = score_stream([True, False, True], t)   # V=1, R=2
        r2 = score_stream([False, False, False], t)  # V=0, R=0 -> max(R,1)=1
        agg = aggregate([r1, r2])
        assert agg.mfdr == pytest.approx((1 + 0) / 2 / ((2 + 1) / 2))

    def test_fwer_matches_closed_form_under_uniform_nulls(self):
        # pure-null uncorrected testing: FWER -> 1 - (1-alpha)^T
        rng = np.random.default_rng(42)
        T, alpha, n = 10, 0.05, 4000
        truth = GroundTruth([True] * T)
        reports = [score_stream(rng.random(T) <= alpha, truth) for _ in range(n)]
        agg = aggregate(reports)
        expected = 1.0 - (1.0 - alpha) ** T
        se = math.sqrt(expected * (1 - expected) / n)
        assert abs(agg.fwer - expected) < 4 * se

    def test_fdx_nonincreasing_in_eps_and_fwer_dominates_fdr(self):
        rng = np.random.default_rng(7)
        truth = GroundTruth(rng.random(30) < 0.5)
        reports = [score_stream(rng.random(30) < 0.2, truth) for _ in range(200)]
        fdx = [aggregate(reports, eps=e).fdx for e in (0.05, 0.1, 0.3, 0.6, 1.0)]
        assert all(a >= b for a, b in zip(fdx, fdx[1:]))
        agg = aggregate(reports)
        assert agg.fwer >= agg.fdr - 1e-12

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])


class TestBH:
    def test_stampede_pvalues(self):
        p = [0.450, 0.006, 0.022, 0.847, 0.130, 0.001, 0.266]
        idx = bh_offline(p, 0.05)
        # arms C and G
        assert sorted(idx.tolist()) == [1, 5]

    def test_all_ones_empty(self):
        assert bh_offline([1.0, 1.0, 1.0], 0.05).size == 0

    def test_small_hand_case(self):
        # k=2 feasible: 0.02 <= 2*0.05/3; k=3 not: 0.9 > 0.05
        idx = bh_offline([0.01, 0.02, 0.9], 0.05)
        assert sorted(idx.tolist()) == [0, 1]

    def test_empty_input(self):
        assert bh_offline([], 0.05).size == 0

    def test_threshold_ties_all_rejected(self):
        # two p-values equal to the passing threshold are both rejected
        idx = bh_offline([0.025, 0.025, 0.9, 0.9], 0.05)
        assert sorted(idx.tolist()) == [0, 1]

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            bh_offline([0.5, 1.5], 0.05)
        with pytest.raises(ValueError):
            bh_offline([0.5, float("nan")], 0.05)

    def test_matches_brute_force_randomized(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            n = int(rng.integers(1, 11))
            # mix plain uniforms with clumped/tied values
            p = rng.random(n)
            if rng.random() < 0.4:
                p = np.round(p, 1)
            alpha = float(rng.choice([0.01, 0.05, 0.1, 0.3]))
            got = sorted(bh_offline(p, alpha).tolist())
            assert got == brute_force_step_up(p.tolist(), alpha)
