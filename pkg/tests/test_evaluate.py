from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PATCH, SIG1, SIG2, make_runs

from fixdetect.causal import Cause, CausalDegree, FailureGrouping, GroupEntry, MeasureKind
from fixdetect.core import FailureSignature, MethodId
from fixdetect.cpd import ChangeEvent, ChangeKind, CpdConfig
from fixdetect.evaluate import (
    IrScores,
    bench_detect,
    score_detection,
    score_grouping,
    sweep_thresholds,
    truth_events_from_dict,
    truth_grouping_from_dict,
)
from fixdetect.sim import EventKind, GroundTruthEvent

M1, M2 = MethodId("m1"), MethodId("m2")
F1 = FailureSignature("t1", M1, 1)


def grouping(mapping):
    entries = []
    for sig, methods in mapping.items():
        d = CausalDegree(0.5, MeasureKind.DIFFERENCE)
        entries.append(GroupEntry(sig, d, 0.6, 0.1, tuple(Cause(m, d) for m in sorted(methods))))
    return FailureGrouping(tuple(entries))


def change(index, kind):
    return ChangeEvent(index, 0.001, 0.5, 0.1 if kind is ChangeKind.FIX else 0.9, kind, 1e-5, 10, None)


def truth_event(at, kind):
    return GroundTruthEvent(at, kind, "t1", 0.0)


class TestScoreGrouping:
    def test_perfect(self):
        s = score_grouping(grouping({F1: {M1}}), {F1: {M1}})
        assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)
        assert s.accuracy is None

    def test_extra_method(self):
        s = score_grouping(grouping({F1: {M1, M2}}), {F1: {M1}})
        assert (s.tp, s.fp, s.fn) == (1, 1, 0)
        assert (s.precision, s.recall) == (0.5, 1.0)
        assert s.f1 == pytest.approx(2 / 3)

    def test_empty_prediction(self):
        s = score_grouping(FailureGrouping(()), {F1: {M1}})
        assert (s.recall, s.f1, s.precision) == (0.0, 0.0, 1.0)

    def test_accuracy_over_candidate_grid(self):
        s = score_grouping(grouping({F1: {M1, M2}}), {F1: {M1}}, candidates={M1, M2, MethodId("m3")})
        assert (s.tp, s.fp, s.fn, s.tn) == (1, 1, 0, 1)
        assert s.accuracy == 2 / 3

    def test_plain_mapping_prediction(self):
        assert score_grouping({F1: {M1}}, {F1: {M1}}).f1 == 1.0


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_ir_identities_exact(tp, fp, fn, tn):
    s = IrScores.from_counts(tp, fp, fn, tn)
    p = Fraction(tp, tp + fp) if tp + fp else Fraction(1)
    r = Fraction(tp, tp + fn) if tp + fn else Fraction(1)
    f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
    acc = Fraction(tp + tn, tp + fp + fn + tn) if tp + fp + fn + tn else Fraction(1)
    assert (s.precision, s.recall, s.f1, s.accuracy) == (float(p), float(r), float(f1), float(acc))
    for v in (s.precision, s.recall, s.f1, s.accuracy):
        assert 0.0 <= v <= 1.0


class TestScoreDetection:
    def test_exact_match(self):
        d = score_detection([change(15, ChangeKind.FIX)], [truth_event(15, EventKind.FIX)], 2)
        assert [delta for _, _, delta in d.matched] == [0]
        assert d.mean_abs_delta == 0.0

    def test_kind_mismatch(self):
        d = score_detection([change(15, ChangeKind.BUG)], [truth_event(15, EventKind.FIX)], 2)
        assert (len(d.matched), len(d.misses), len(d.spurious)) == (0, 1, 1)

    def test_too_far(self):
        d = score_detection([change(19, ChangeKind.FIX)], [truth_event(15, EventKind.FIX)], 2)
        assert (len(d.matched), len(d.misses), len(d.spurious)) == (0, 1, 1)
        assert d.mean_abs_delta is None

    def test_greedy_prefers_nearest(self):
        events = [change(14, ChangeKind.FIX), change(16, ChangeKind.FIX)]
        truth = [truth_event(15, EventKind.FIX), truth_event(17, EventKind.FIX)]
        d = score_detection(events, truth, 2)
        assert sorted(delta for _, _, delta in d.matched) == [-1, -1]

    def test_negative_tolerance(self):
        with pytest.raises(ValueError):
            score_detection([], [], -1)

    @given(
        st.lists(st.tuples(st.integers(0, 60), st.booleans()), max_size=6),
        st.lists(st.tuples(st.integers(0, 60), st.booleans()), max_size=6),
        st.integers(0, 10),
        st.integers(0, 10),
    )
    def test_matches_monotone_in_tolerance(self, ev, tr, lo, extra):
        events = sorted((change(i, ChangeKind.FIX if f else ChangeKind.BUG) for i, f in ev), key=lambda e: e.index)
        truth = sorted((truth_event(i, EventKind.FIX if f else EventKind.BUG) for i, f in tr),
                       key=lambda e: e.at_bucket)
        a = score_detection(events, truth, lo)
        b = score_detection(events, truth, lo + extra)
        assert len(b.matched) >= len(a.matched)
        assert all(abs(delta) <= lo for _, _, delta in a.matched)


def test_threshold_sweep_is_monotone():
    base = make_runs("v0", 40, 4) + make_runs("v0", 40, 2, sig=SIG2, t=100)
    upd = make_runs("v1", 40, 30) + make_runs("v1", 40, 12, sig=SIG2, t=100)
    truth = {SIG1: {MethodId("pkg.Foo.bar")}}
    rows = sweep_thresholds(base, upd, PATCH, truth, [0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9])
    counts = [n for _, n, _ in rows]
    assert counts == sorted(counts, reverse=True)
    assert counts[0] == 2 and counts[-1] == 0
    assert rows[3][2].f1 == 1.0


def test_truth_parsers():
    doc = {
        "events": [{"at_bucket": 3, "kind": "bug_introduced", "affected_test": "t1", "new_updated_fail_rate": 0.9}],
        "grouping": [{"signature": F1.to_dict(), "methods": ["m1"]}],
    }
    assert truth_events_from_dict(doc) == [GroundTruthEvent(3, EventKind.BUG, "t1", 0.9)]
    assert truth_grouping_from_dict(doc) == {F1: {M1}}


class TestBench:
    def test_small_series_detects_shift(self):
        r = bench_detect(100, CpdConfig(), 3)
        assert len(r.events) >= 1
        assert r.events[0].kind is ChangeKind.FIX and r.events[0].index == 50
        assert set(r.to_dict()) == {"n", "seed", "wall_time_s", "shift_at", "n_events", "events"}

    def test_too_short(self):
        r = bench_detect(9, CpdConfig(min_segment=5), 0)
        assert r.events == () and r.wall_time < 0.1
