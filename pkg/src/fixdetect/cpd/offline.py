"""Offline changepoint detection by scanning two-sample tests over split points."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

from ..errors import MalformedInput
from ..series import DegreeSeries
from .stattests import ks_scan_logp, mw_scan_logp

MAX_CANDIDATES = 2000


class TwoSampleTest(str, enum.Enum):
    MANN_WHITNEY = "mann_whitney_u"
    KOLMOGOROV_SMIRNOV = "kolmogorov_smirnov"


class Correction(str, enum.Enum):
    BONFERRONI = "bonferroni"
    NONE = "none"


class ChangeKind(str, enum.Enum):
    FIX = "fix"
    BUG = "bug"


@dataclass(frozen=True)
class CpdConfig:
    alpha: float = 0.01
    min_segment: int = 5
    test: TwoSampleTest = TwoSampleTest.MANN_WHITNEY
    stride: int = 1
    correction: Correction = Correction.BONFERRONI

    def __post_init__(self) -> None:
        object.__setattr__(self, "test", TwoSampleTest(self.test))
        object.__setattr__(self, "correction", Correction(self.correction))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.min_segment < 2:
            raise ValueError("min_segment must be at least 2")
        if self.stride < 1:
            raise ValueError("stride must be positive")

    def effective_stride(self, n: int) -> int:
        if n > MAX_CANDIDATES:
            return max(self.stride, math.ceil(n / MAX_CANDIDATES))
        return self.stride

    def candidates(self, n: int) -> np.ndarray:
        if n < 2 * self.min_segment:
            return np.empty(0, dtype=np.int64)
        return np.arange(self.min_segment, n - self.min_segment + 1, self.effective_stride(n), dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "min_segment": self.min_segment,
            "test": self.test.value,
            "stride": self.stride,
            "correction": self.correction.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> CpdConfig:
        unknown = set(d) - {"alpha", "min_segment", "test", "stride", "correction"}
        if unknown:
            raise MalformedInput(f"cpd: unknown field(s) {', '.join(sorted(unknown))}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise MalformedInput(f"cpd: {exc}") from None


@dataclass(frozen=True)
class ChangeEvent:
    """A detected split: ``index`` points precede the change."""

    index: int
    p_value: float
    mean_before: float
    mean_after: float
    kind: ChangeKind
    raw_p_value: float = math.nan
    n_candidates: int = 1
    bucket_start: Optional[int] = None

    def to_dict(self) -> dict:
        d = {
            "index": self.index,
            "p_value": self.p_value,
            "mean_before": self.mean_before,
            "mean_after": self.mean_after,
            "kind": self.kind.value,
            "raw_p_value": self.raw_p_value,
            "n_candidates": self.n_candidates,
        }
        if self.bucket_start is not None:
            d["t"] = self.bucket_start
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ChangeEvent:
        try:
            return cls(
                index=int(d["index"]),
                p_value=float(d["p_value"]),
                mean_before=float(d["mean_before"]),
                mean_after=float(d["mean_after"]),
                kind=ChangeKind(d["kind"]),
                raw_p_value=float(d.get("raw_p_value", math.nan)),
                n_candidates=int(d.get("n_candidates", 1)),
                bucket_start=d.get("t"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"event: {exc}") from None


SeriesLike = Union[DegreeSeries, Sequence[float], np.ndarray]


def _values(series: SeriesLike) -> np.ndarray:
    if isinstance(series, DegreeSeries):
        return np.array(series.degrees, dtype=float)
    return np.asarray(series, dtype=float).ravel()


def _mean(x: np.ndarray) -> float:
    return math.fsum(x.tolist()) / x.size


def _scan(x: np.ndarray, config: CpdConfig):
    """Return (k, log p_min, n_candidates) or None when there is nothing to test."""
    ks = config.candidates(x.size)
    if ks.size == 0:
        return None
    if config.test is TwoSampleTest.MANN_WHITNEY:
        logp = mw_scan_logp(x, ks)
    else:
        logp = ks_scan_logp(x, ks)
    best = int(np.argmin(logp))  # first occurrence, so the earliest split wins ties
    return int(ks[best]), float(logp[best]), int(ks.size)


def _detect_values(x: np.ndarray, config: CpdConfig) -> Optional[ChangeEvent]:
    found = _scan(x, config)
    if found is None:
        return None
    k, logp, m = found
    if config.correction is Correction.BONFERRONI:
        corrected = min(1.0, math.exp(min(logp + math.log(m), 0.0)))
    else:
        corrected = math.exp(logp)
    if corrected > config.alpha:
        return None
    before, after = _mean(x[:k]), _mean(x[k:])
    if before == after:
        return None
    kind = ChangeKind.FIX if after < before else ChangeKind.BUG
    return ChangeEvent(k, corrected, before, after, kind, math.exp(logp), m)


def _stamp(event: ChangeEvent, series: SeriesLike, offset: int) -> ChangeEvent:
    index = event.index + offset
    t = series.points[index].bucket_start if isinstance(series, DegreeSeries) else None
    return ChangeEvent(
        index, event.p_value, event.mean_before, event.mean_after, event.kind, event.raw_p_value, event.n_candidates, t
    )


def detect_changepoint(series: SeriesLike, config: CpdConfig = CpdConfig()) -> Optional[ChangeEvent]:
    """Best single split of ``series`` if it is significant after correction.

    Every candidate split with at least ``min_segment`` points on each side is
    tested. The smallest p-value is corrected for the number of candidates
    and compared with ``alpha``. A split whose two halves have equal means is
    never reported, since it is neither a fix nor a bug.
    """
    x = _values(series)
    event = _detect_values(x, config)
    return None if event is None else _stamp(event, series, 0)


def detect_all(series: SeriesLike, config: CpdConfig = CpdConfig()) -> list[ChangeEvent]:
    """Binary segmentation: detect, then recurse into both halves."""
    x = _values(series)
    events = []
    stack = [(0, x.size)]
    while stack:
        lo, hi = stack.pop()
        event = _detect_values(x[lo:hi], config)
        if event is None:
            continue
        events.append(_stamp(event, series, lo))
        stack.append((lo, lo + event.index))
        stack.append((lo + event.index, hi))
    events.sort(key=lambda e: e.index)
    return events
