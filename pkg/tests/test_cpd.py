import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from oracles import mw_bruteforce

from fixdetect.causal import split_by_version
from fixdetect.cpd import (
    ChangeKind,
    Correction,
    CpdConfig,
    CusumState,
    cusum_step,
    detect_all,
    detect_changepoint,
    run_cusum,
)
from fixdetect.errors import InvalidParameter
from fixdetect.series import build_degree_series
from fixdetect.sim import simulate, single_test_scenario


def step_series(seed=7, n_before=15, n_after=15, before=0.8, after=0.05, sigma=0.02):
    rng = np.random.default_rng(seed)
    means = np.r_[np.full(n_before, before), np.full(n_after, after)]
    return means + rng.normal(0.0, sigma, n_before + n_after)


def sim_series(scenario):
    runs, truth = simulate(scenario)
    patch = scenario.patch()
    base, upd = split_by_version(runs, patch)
    sig = scenario.tests[0].signature
    return build_degree_series(base, upd, patch, sig, sig.top_method), truth


class TestConfig:
    def test_defaults(self):
        c = CpdConfig()
        assert (c.alpha, c.min_segment, c.stride, c.correction) == (0.01, 5, 1, Correction.BONFERRONI)

    @pytest.mark.parametrize("kwargs", [{"alpha": 0.0}, {"alpha": 1.0}, {"min_segment": 1}, {"stride": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            CpdConfig(**kwargs)

    def test_stride_auto_raise(self):
        c = CpdConfig()
        assert c.effective_stride(2000) == 1
        assert c.effective_stride(100_000) == 50
        assert len(c.candidates(100_000)) <= 2000
        assert list(c.candidates(12)) == [5, 6, 7]


class TestDetectChangepoint:
    def test_step_down_is_fix_at_15(self):
        x = step_series()
        # oracle: the 12-point window around the split is fully separated, the most extreme of 924 labelings
        assert mw_bruteforce(list(x[9:15]), list(x[15:21])) == Fraction(2, 924)
        ev = detect_changepoint(x)
        assert ev is not None
        assert (ev.index, ev.kind) == (15, ChangeKind.FIX)
        ref = stats.mannwhitneyu(x[:15], x[15:], alternative="two-sided", method="asymptotic").pvalue
        assert ev.raw_p_value == pytest.approx(ref, rel=1e-9)
        assert ev.p_value == pytest.approx(min(1.0, ev.n_candidates * ref), rel=1e-9)
        assert ev.n_candidates == 21
        assert ev.mean_before == pytest.approx(0.8, abs=0.02)
        assert ev.mean_after == pytest.approx(0.05, abs=0.02)
        assert ev.p_value <= CpdConfig().alpha

    def test_constant_series(self):
        assert detect_changepoint([0.5] * 40) is None

    def test_too_short(self):
        assert detect_changepoint(step_series()[:6], CpdConfig(min_segment=5)) is None

    def test_ks_variant_detects_step(self):
        ev = detect_changepoint(step_series(), CpdConfig(test="kolmogorov_smirnov"))
        assert (ev.index, ev.kind) == (15, ChangeKind.FIX)

    def test_equal_means_suppressed(self):
        # the halves differ in spread, not level; a scan with no correction would flag the split
        x = [0.0] * 10 + [-0.5, 0.5] * 5 + [0.0] * 10
        cfg = CpdConfig(alpha=0.5, correction="none", min_segment=10)
        assert detect_changepoint(x, cfg) is None

    def test_reversal_duality(self):
        x = step_series()
        fwd = detect_changepoint(x)
        rev = detect_changepoint(x[::-1])
        assert fwd.kind is ChangeKind.FIX and rev.kind is ChangeKind.BUG
        assert rev.index == len(x) - fwd.index
        assert rev.raw_p_value == fwd.raw_p_value

    @given(st.integers(0, 10_000))
    def test_kind_agrees_with_means(self, seed):
        rng = np.random.default_rng(seed)
        x = np.r_[rng.normal(0, 0.1, 12), rng.normal(rng.choice([-0.5, 0.5]), 0.1, 12)]
        ev = detect_changepoint(x)
        if ev is not None:
            assert (ev.kind is ChangeKind.FIX) == (ev.mean_after < ev.mean_before)
            assert ev.mean_after != ev.mean_before

    def test_false_positive_control(self):
        alpha, trials = 0.05, 400
        rng = np.random.default_rng(123)
        hits = sum(detect_changepoint(rng.normal(size=60), CpdConfig(alpha=alpha)) is not None for _ in range(trials))
        assert hits / trials <= alpha + 3 * math.sqrt(alpha / trials)

    def test_accepts_degree_series(self):
        s, truth = sim_series(single_test_scenario(3, 40, 0.05, 0.8, events=((20, 0.05),)))
        ev = detect_changepoint(s)
        assert ev.index == 20 and ev.bucket_start == s.points[20].bucket_start


class TestDetectAll:
    def test_bug_then_fix(self):
        # degree steps 0.3 -> 0.8 at bucket 20 -> 0.0 at bucket 40
        sc = single_test_scenario(11, 60, 0.05, 0.35, events=((20, 0.85), (40, 0.05)))
        s, truth = sim_series(sc)
        events = detect_all(s)
        assert [e.kind for e in events] == [ChangeKind.BUG, ChangeKind.FIX]
        assert abs(events[0].index - 20) <= 2 and abs(events[1].index - 40) <= 2

    def test_constant(self):
        assert detect_all([0.25] * 50) == []

    def test_single_shift_equals_single_detection(self):
        x = step_series()
        assert detect_all(x) == [detect_changepoint(x)]

    def test_sorted_and_each_significant(self):
        rng = np.random.default_rng(5)
        x = np.r_[rng.normal(0, 0.05, 30), rng.normal(0.6, 0.05, 30), rng.normal(0.2, 0.05, 30)]
        events = detect_all(x)
        assert [e.index for e in events] == sorted(e.index for e in events)
        assert all(e.p_value <= 0.01 for e in events)
        assert [e.index for e in events] == [30, 60]


class TestCusum:
    def test_zero_stream_never_alarms(self):
        st_ = CusumState(0.0, 0.5, 2.0)
        for _ in range(1000):
            _, alarm = cusum_step(st_, 0.0)
            assert alarm is None
        assert st_.s_plus == st_.s_minus == 0.0

    def test_upward_shift_alarms_bug_on_fifth(self):
        alarms = run_cusum([0.0] * 10 + [1.0] * 10, 0.0, 0.5, 2.0)
        assert alarms[0] == (14, ChangeKind.BUG)

    def test_sums_follow_recursion(self):
        st_ = CusumState(0.0, 0.5, 2.0)
        seen = []
        for _ in range(4):
            cusum_step(st_, 1.0)
            seen.append(st_.s_plus)
        assert seen == [0.5, 1.0, 1.5, 2.0]
        _, alarm = cusum_step(st_, 1.0)
        assert alarm is ChangeKind.BUG
        assert (st_.s_plus, st_.s_minus, st_.mu0) == (0.0, 0.0, 1.0)

    def test_drop_alarms_fix_on_second(self):
        alarms = run_cusum([0.8] * 10 + [0.0] * 10, 0.8, 0.1, 1.0)
        assert alarms[0] == (11, ChangeKind.FIX)

    def test_rebaseline_uses_recent_window(self):
        st_ = CusumState(0.8, 0.1, 1.0, min_segment=3)
        for x in (0.8, 0.8, 0.0):
            cusum_step(st_, x)
        _, alarm = cusum_step(st_, 0.0)
        assert alarm is ChangeKind.FIX
        assert st_.mu0 == pytest.approx((0.8 + 0.0 + 0.0) / 3)

    @pytest.mark.parametrize("h", [0.0, -1.0])
    def test_invalid_threshold(self, h):
        with pytest.raises(InvalidParameter):
            CusumState(0.0, 0.5, h)

    def test_replay_determinism(self):
        rng = np.random.default_rng(0)
        stream = np.r_[rng.normal(0, 0.2, 300), rng.normal(0.6, 0.2, 300), rng.normal(0, 0.2, 300)].tolist()
        first = run_cusum(stream, 0.0, 0.1, 1.5)
        assert first == run_cusum(stream, 0.0, 0.1, 1.5)
        assert any(k is ChangeKind.BUG for _, k in first) and any(k is ChangeKind.FIX for _, k in first)
