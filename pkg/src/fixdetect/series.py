"""Time series of error-causing degree for one (method, failure) pair."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .causal import MeasureKind, causal_degree, estimate_do_probability
from .core import FailureSignature, IdentityMode, MethodId, PatchIntervention, TestRunReport
from .errors import EmptyPopulation, EmptySeries, IndexOutOfRange, InvalidParameter, MalformedInput

DEFAULT_BUCKET_WIDTH_MS = 3_600_000
DEFAULT_MIN_RUNS_PER_BUCKET = 5


@dataclass(frozen=True)
class SeriesPoint:
    bucket_start: int
    degree: float
    n_runs: int


@dataclass(frozen=True)
class DegreeSeries:
    method: MethodId
    signature: FailureSignature
    points: tuple[SeriesPoint, ...]
    bucket_width: int = DEFAULT_BUCKET_WIDTH_MS

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(self.points))
        if self.bucket_width <= 0:
            raise InvalidParameter("bucket_width must be positive")
        prev = None
        for pt in self.points:
            if not -1.0 <= pt.degree <= 1.0:
                raise ValueError(f"degree {pt.degree} outside [-1, 1]")
            if pt.n_runs < 1:
                raise ValueError("n_runs must be positive")
            if prev is not None:
                gap = pt.bucket_start - prev
                if gap <= 0 or gap % self.bucket_width:
                    raise ValueError("bucket starts must increase by multiples of bucket_width")
            prev = pt.bucket_start

    def __len__(self) -> int:
        return len(self.points)

    @property
    def degrees(self) -> list[float]:
        return [pt.degree for pt in self.points]

    def with_points(self, points: Sequence[SeriesPoint]) -> DegreeSeries:
        return DegreeSeries(self.method, self.signature, tuple(points), self.bucket_width)

    def to_dict(self) -> dict:
        return {
            "method": self.method.name,
            "signature": self.signature.to_dict(),
            "bucket_width_ms": self.bucket_width,
            "points": [{"t": p.bucket_start, "degree": p.degree, "n_runs": p.n_runs} for p in self.points],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], strict: bool = True) -> DegreeSeries:
        try:
            if strict:
                extra = set(d) - {"method", "signature", "bucket_width_ms", "points"}
                if extra:
                    raise MalformedInput(f"series: unknown field(s) {', '.join(sorted(extra))}")
            points = []
            for i, p in enumerate(d["points"]):
                if strict and set(p) - {"t", "degree", "n_runs"}:
                    raise MalformedInput(f"series.points[{i}]: unknown field(s)")
                points.append(SeriesPoint(int(p["t"]), float(p["degree"]), int(p["n_runs"])))
            return cls(
                MethodId(d["method"]),
                FailureSignature.from_dict(d["signature"], strict, "series.signature"),
                tuple(points),
                int(d["bucket_width_ms"]),
            )
        except MalformedInput:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"series: {exc}") from None


def build_degree_series(
    baseline_runs: Sequence[TestRunReport],
    updated_runs: Sequence[TestRunReport],
    patch: PatchIntervention,
    signature: FailureSignature,
    method: MethodId,
    bucket_width: int = DEFAULT_BUCKET_WIDTH_MS,
    min_runs_per_bucket: int = DEFAULT_MIN_RUNS_PER_BUCKET,
    identity: IdentityMode = IdentityMode.TRACE,
) -> DegreeSeries:
    """Bucket both populations in time and compute a difference degree per bucket.

    Buckets are aligned to the earliest timestamp in either list. A bucket
    only yields a point when both populations have at least
    ``min_runs_per_bucket`` runs of the signature's test there; sparse
    buckets are left out rather than recorded as zero.
    """
    if not baseline_runs or not updated_runs:
        raise EmptyPopulation("both run lists must be non-empty")
    if bucket_width <= 0:
        raise InvalidParameter("bucket_width must be positive")
    if min_runs_per_bucket < 1:
        raise InvalidParameter("min_runs_per_bucket must be positive")

    t0 = min(min(r.timestamp for r in baseline_runs), min(r.timestamp for r in updated_runs))
    base: dict[int, list] = defaultdict(list)
    upd: dict[int, list] = defaultdict(list)
    for runs, out, version in ((baseline_runs, base, patch.baseline_version), (updated_runs, upd, patch.updated_version)):
        for r in runs:
            if r.test_id == signature.test_id and r.version_id == version:
                out[(r.timestamp - t0) // bucket_width].append(r)

    points = []
    for b in sorted(base.keys() & upd.keys()):
        rb, ru = base[b], upd[b]
        if len(rb) < min_runs_per_bucket or len(ru) < min_runs_per_bucket:
            continue
        p_with = estimate_do_probability(ru, signature, identity)
        p_without = estimate_do_probability(rb, signature, identity)
        degree = causal_degree(p_with, p_without, MeasureKind.DIFFERENCE).value
        points.append(SeriesPoint(t0 + b * bucket_width, degree, len(rb) + len(ru)))
    if not points:
        raise EmptySeries(f"no bucket has {min_runs_per_bucket} runs in both populations")
    return DegreeSeries(method, signature, tuple(points), bucket_width)


def split_series(series: DegreeSeries, k: int) -> tuple[DegreeSeries, DegreeSeries]:
    """Split into the first ``k`` points and the rest; both halves non-empty."""
    n = len(series)
    if not 1 <= k < n:
        raise IndexOutOfRange(f"split index {k} not in [1, {n - 1}]")
    return series.with_points(series.points[:k]), series.with_points(series.points[k:])


def concat_series(first: DegreeSeries, second: DegreeSeries) -> DegreeSeries:
    return first.with_points(first.points + second.points)
