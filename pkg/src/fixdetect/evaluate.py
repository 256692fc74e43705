"""Scoring of groupings and detections against ground truth, plus a timing bench."""

from __future__ import annotations

import time
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .causal import FailureGrouping, GroupingConfig, group_failures
from .core import FailureSignature, MethodId, PatchIntervention, TestRunReport, trace_hash
from .cpd import ChangeEvent, ChangeKind, CpdConfig, detect_all
from .errors import MalformedInput
from .series import DegreeSeries, SeriesPoint
from .sim import EventKind, GroundTruthEvent

_KIND_MATCH = {ChangeKind.FIX: EventKind.FIX, ChangeKind.BUG: EventKind.BUG}


@dataclass(frozen=True)
class IrScores:
    tp: int
    fp: int
    fn: int
    tn: Optional[int]
    precision: float
    recall: float
    f1: float
    accuracy: Optional[float]

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, tn: Optional[int] = None) -> IrScores:
        # empty denominators count as vacuously perfect so threshold sweeps stay total;
        # rationals keep the identities exact before the final rounding
        precision = Fraction(tp, tp + fp) if tp + fp else Fraction(1)
        recall = Fraction(tp, tp + fn) if tp + fn else Fraction(1)
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else Fraction(0)
        accuracy = None
        if tn is not None:
            total = tp + fp + fn + tn
            accuracy = float(Fraction(tp + tn, total)) if total else 1.0
        return cls(tp, fp, fn, tn, float(precision), float(recall), float(f1), accuracy)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
        }


Truth = Mapping[FailureSignature, Iterable[MethodId]]


def _pairs(grouping: Union[FailureGrouping, Truth]) -> set[tuple[FailureSignature, MethodId]]:
    if isinstance(grouping, FailureGrouping):
        return grouping.pairs()
    return {(sig, m) for sig, methods in grouping.items() for m in methods}


def score_grouping(
    predicted: Union[FailureGrouping, Truth],
    truth: Truth,
    candidates: Optional[Iterable[MethodId]] = None,
) -> IrScores:
    """Treat every (signature, method) attribution as one binary decision.

    True negatives, and hence accuracy, need a candidate-method universe:
    they are the cells of (seen signatures x candidates) that neither side
    claims.
    """
    pred = _pairs(predicted)
    true = _pairs(truth)
    tp, fp, fn = len(pred & true), len(pred - true), len(true - pred)
    tn = None
    if candidates is not None:
        sigs = set(truth)
        sigs |= {e.signature for e in predicted.entries} if isinstance(predicted, FailureGrouping) else set(predicted)
        grid = {(s, m) for s in sigs for m in candidates}
        tn = len(grid - pred - true)
    return IrScores.from_counts(tp, fp, fn, tn)


def sweep_thresholds(
    baseline_runs: Sequence[TestRunReport],
    updated_runs: Sequence[TestRunReport],
    patch: PatchIntervention,
    truth: Truth,
    thresholds: Iterable[float],
    base_config: GroupingConfig = GroupingConfig(),
) -> list[tuple[float, int, IrScores]]:
    """(threshold, predicted pair count, scores) for each threshold."""
    out = []
    for th in thresholds:
        cfg = GroupingConfig(base_config.measure, th, base_config.min_runs_per_version, base_config.identity)
        grouping = group_failures(baseline_runs, updated_runs, patch, cfg)
        out.append((th, len(grouping.pairs()), score_grouping(grouping, truth)))
    return out


@dataclass(frozen=True)
class DetectionScore:
    matched: tuple[tuple[GroundTruthEvent, ChangeEvent, int], ...]
    misses: tuple[GroundTruthEvent, ...]
    spurious: tuple[ChangeEvent, ...]
    mean_abs_delta: Optional[float]

    def ir(self) -> IrScores:
        return IrScores.from_counts(len(self.matched), len(self.spurious), len(self.misses))

    def to_dict(self) -> dict:
        return {
            "matched": [
                {"truth": t.to_dict(), "detected": d.to_dict(), "index_delta": delta} for t, d, delta in self.matched
            ],
            "misses": [t.to_dict() for t in self.misses],
            "spurious": [d.to_dict() for d in self.spurious],
            "mean_abs_delta": self.mean_abs_delta,
            "scores": self.ir().to_dict(),
        }


def score_detection(
    events: Sequence[ChangeEvent], truth: Sequence[GroundTruthEvent], match_tolerance: int = 2
) -> DetectionScore:
    """Greedy one-to-one matching by smallest index distance; kinds must agree."""
    if match_tolerance < 0:
        raise ValueError("match_tolerance must be non-negative")
    candidates = []
    for i, t in enumerate(truth):
        for j, e in enumerate(events):
            delta = e.index - t.at_bucket
            if _KIND_MATCH[e.kind] is t.kind and abs(delta) <= match_tolerance:
                candidates.append((abs(delta), i, j, delta))
    candidates.sort()
    used_t, used_e, matched = set(), set(), []
    for _, i, j, delta in candidates:
        if i in used_t or j in used_e:
            continue
        used_t.add(i)
        used_e.add(j)
        matched.append((i, j, delta))
    matched.sort()
    mean_abs = sum(abs(d) for _, _, d in matched) / len(matched) if matched else None
    return DetectionScore(
        tuple((truth[i], events[j], d) for i, j, d in matched),
        tuple(t for i, t in enumerate(truth) if i not in used_t),
        tuple(e for j, e in enumerate(events) if j not in used_e),
        mean_abs,
    )


def truth_events_from_dict(doc: Mapping) -> list[GroundTruthEvent]:
    try:
        return [
            GroundTruthEvent(int(e["at_bucket"]), EventKind(e["kind"]), e["affected_test"],
                             float(e["new_updated_fail_rate"]))
            for e in doc["events"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"truth.events: {exc}") from None


def truth_grouping_from_dict(doc: Mapping) -> dict[FailureSignature, set[MethodId]]:
    try:
        return {
            FailureSignature.from_dict(g["signature"], where=f"truth.grouping[{i}].signature"):
                {MethodId(m) for m in g["methods"]}
            for i, g in enumerate(doc["grouping"])
        }
    except (KeyError, TypeError) as exc:
        raise MalformedInput(f"truth.grouping: {exc}") from None


@dataclass(frozen=True)
class BenchResult:
    n: int
    seed: int
    wall_time: float
    shift_at: int
    events: tuple[ChangeEvent, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "wall_time_s": self.wall_time,
            "shift_at": self.shift_at,
            "n_events": len(self.events),
            "events": [e.to_dict() for e in self.events],
        }


def synthetic_shift_series(n: int, seed: int, before: float = 0.6, after: float = 0.1, sigma: float = 0.05):
    """n-point degree series with one level shift at n // 2."""
    rng = np.random.default_rng(seed)
    shift = n // 2
    means = np.where(np.arange(n) < shift, before, after)
    values = np.clip(means + rng.normal(0.0, sigma, n), -1.0, 1.0)
    width = 3_600_000
    sig = FailureSignature("bench", MethodId("bench.method"), trace_hash(["bench.method"]))
    points = tuple(SeriesPoint(i * width, float(v), 1) for i, v in enumerate(values.tolist()))
    return DegreeSeries(MethodId("bench.method"), sig, points, width), shift


def bench_detect(n: int, config: CpdConfig = CpdConfig(), seed: int = 0) -> BenchResult:
    """Time ``detect_all`` (single-threaded) on a synthetic series with one shift."""
    series, shift = synthetic_shift_series(n, seed)
    start = time.perf_counter()
    events = detect_all(series, config)
    elapsed = time.perf_counter() - start
    return BenchResult(n, seed, elapsed, shift, tuple(events))
