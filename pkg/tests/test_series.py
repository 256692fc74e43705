import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import PATCH, SIG1, make_runs

from fixdetect.core import MethodId
from fixdetect.errors import EmptyPopulation, EmptySeries, IndexOutOfRange, InvalidParameter
from fixdetect.series import DegreeSeries, SeriesPoint, build_degree_series, concat_series, split_series

M = MethodId("pkg.Foo.bar")
W = 1000


def two_bucket_runs():
    # bucket 0: 18/20 vs 2/20 failing; bucket 1: 2/20 vs 2/20
    upd = make_runs("v1", 20, 18, t=0) + make_runs("v1", 20, 2, t=W)
    base = make_runs("v0", 20, 2, t=0) + make_runs("v0", 20, 2, t=W)
    return base, upd


def series_of(values, width=W):
    pts = tuple(SeriesPoint(i * width, v, 10) for i, v in enumerate(values))
    return DegreeSeries(M, SIG1, pts, width)


def test_hand_built_two_buckets():
    base, upd = two_bucket_runs()
    s = build_degree_series(base, upd, PATCH, SIG1, M, W, 10)
    assert s.degrees == [0.8, 0.0]
    assert [p.bucket_start for p in s.points] == [0, W]
    assert [p.n_runs for p in s.points] == [40, 40]


def test_sparse_buckets_are_gaps():
    base, upd = two_bucket_runs()
    upd += make_runs("v1", 3, 3, t=2 * W) + make_runs("v1", 20, 0, t=3 * W)
    base += make_runs("v0", 20, 0, t=2 * W) + make_runs("v0", 20, 0, t=3 * W)
    s = build_degree_series(base, upd, PATCH, SIG1, M, W, 10)
    assert [p.bucket_start for p in s.points] == [0, W, 3 * W]


def test_all_buckets_sparse():
    with pytest.raises(EmptySeries):
        build_degree_series(make_runs("v0", 3, 0), make_runs("v1", 3, 1), PATCH, SIG1, M, W, 10)


def test_single_bucket_series():
    s = build_degree_series(make_runs("v0", 10, 1), make_runs("v1", 10, 9), PATCH, SIG1, M, W, 10)
    assert len(s) == 1


def test_preconditions():
    with pytest.raises(EmptyPopulation):
        build_degree_series([], make_runs("v1", 10, 1), PATCH, SIG1, M, W, 1)
    with pytest.raises(InvalidParameter):
        build_degree_series(make_runs("v0", 10, 1), make_runs("v1", 10, 1), PATCH, SIG1, M, 0, 1)


def test_alignment_to_earliest_timestamp():
    offset = 12_345
    upd = make_runs("v1", 20, 18, t=offset) + make_runs("v1", 20, 2, t=offset + W)
    base = make_runs("v0", 20, 2, t=offset) + make_runs("v0", 20, 2, t=offset + W)
    s = build_degree_series(base, upd, PATCH, SIG1, M, W, 10)
    assert [p.bucket_start for p in s.points] == [offset, offset + W]


def test_order_independent():
    base, upd = two_bucket_runs()
    expected = build_degree_series(base, upd, PATCH, SIG1, M, W, 10)
    rng = random.Random(0)
    for _ in range(5):
        rng.shuffle(base)
        rng.shuffle(upd)
        assert build_degree_series(base, upd, PATCH, SIG1, M, W, 10) == expected


@pytest.mark.parametrize("k", [0, 10, -1])
def test_split_out_of_range(k):
    with pytest.raises(IndexOutOfRange):
        split_series(series_of([0.1] * 10), k)


def test_split_sizes():
    t1, t2 = split_series(series_of([i / 10 for i in range(10)]), 4)
    assert (len(t1), len(t2)) == (4, 6)


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=30), st.data())
def test_split_concat_roundtrip(values, data):
    s = series_of(values)
    k = data.draw(st.integers(1, len(values) - 1))
    t1, t2 = split_series(s, k)
    assert len(t1) == k
    assert concat_series(t1, t2) == s


def test_series_invariants():
    with pytest.raises(ValueError):
        series_of([1.5])
    with pytest.raises(ValueError):
        DegreeSeries(M, SIG1, (SeriesPoint(0, 0.0, 1), SeriesPoint(W + 1, 0.0, 1)), W)
    with pytest.raises(ValueError):
        DegreeSeries(M, SIG1, (SeriesPoint(W, 0.0, 1), SeriesPoint(0, 0.0, 1)), W)


def test_json_roundtrip():
    s = series_of([0.5, 0.25, -0.125])
    doc = s.to_dict()
    assert doc["bucket_width_ms"] == W and doc["points"][1] == {"t": W, "degree": 0.25, "n_runs": 10}
    assert DegreeSeries.from_dict(doc) == s
