"""Interventional failure probabilities and failure-to-method grouping.

A patch is treated as the intervention: runs of the updated version estimate
the failure probability with the patch applied, runs of the baseline version
estimate it without. The patch is a cause of a failure when it raises that
probability, and the size of the rise (difference or ratio) is its degree.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Optional, Sequence

from .core import (
    FailureSignature,
    IdentityMode,
    MethodId,
    PatchIntervention,
    ProbabilityEstimate,
    TestRunReport,
)
from .errors import (
    EmptyPopulation,
    InsufficientRuns,
    MalformedInput,
    MixedPopulation,
    UndefinedRatio,
    UnsupportedMeasure,
)


class MeasureKind(str, enum.Enum):
    PEARL = "pearl_predicate"
    DIFFERENCE = "difference"
    RATIO = "ratio"


DEFAULT_THRESHOLDS = {
    MeasureKind.PEARL: 0.0,
    MeasureKind.DIFFERENCE: 0.2,
    MeasureKind.RATIO: 2.0,
}


@dataclass(frozen=True)
class CausalDegree:
    value: float
    measure: MeasureKind

    def __post_init__(self) -> None:
        v = self.value
        if math.isnan(v):
            raise ValueError("degree must not be NaN")
        if self.measure in (MeasureKind.DIFFERENCE, MeasureKind.PEARL) and not -1.0 <= v <= 1.0:
            raise ValueError(f"difference degree {v} outside [-1, 1]")
        if self.measure is MeasureKind.RATIO and v < 0:
            raise ValueError(f"ratio degree {v} is negative")

    @property
    def infinite(self) -> bool:
        return math.isinf(self.value)


def _encode_degree(value: float) -> Any:
    # JSON has no infinity literal
    return "inf" if math.isinf(value) else value


def _decode_degree(raw: Any, where: str) -> float:
    if raw == "inf":
        return math.inf
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise MalformedInput(f"{where}: expected a number or \"inf\"")
    return float(raw)


@dataclass(frozen=True)
class GroupingConfig:
    measure: MeasureKind = MeasureKind.DIFFERENCE
    threshold: Optional[float] = None
    min_runs_per_version: int = 10
    identity: IdentityMode = IdentityMode.TRACE

    def __post_init__(self) -> None:
        object.__setattr__(self, "measure", MeasureKind(self.measure))
        object.__setattr__(self, "identity", IdentityMode(self.identity))
        if self.threshold is None:
            object.__setattr__(self, "threshold", DEFAULT_THRESHOLDS[self.measure])
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if self.min_runs_per_version < 1:
            raise ValueError("min_runs_per_version must be >= 1")

    def to_dict(self) -> dict:
        return {
            "measure": self.measure.value,
            "threshold": self.threshold,
            "min_runs_per_version": self.min_runs_per_version,
            "identity": self.identity.value,
        }


@dataclass(frozen=True)
class Cause:
    method: MethodId
    degree: CausalDegree


@dataclass(frozen=True)
class GroupEntry:
    signature: FailureSignature
    degree: CausalDegree
    p_with: ProbabilityEstimate
    p_without: ProbabilityEstimate
    causes: tuple[Cause, ...] = ()

    def to_dict(self) -> dict:
        return {
            "signature": self.signature.to_dict(),
            "degree": _encode_degree(self.degree.value),
            "p_with": self.p_with.to_dict(),
            "p_without": self.p_without.to_dict(),
            "causes": [
                {"method": c.method.name, "degree": _encode_degree(c.degree.value), "measure": c.degree.measure.value}
                for c in self.causes
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], where: str = "entry") -> GroupEntry:
        try:
            sig = FailureSignature.from_dict(d["signature"], where=f"{where}.signature")
            causes = []
            for i, c in enumerate(d.get("causes", [])):
                measure = MeasureKind(c["measure"])
                value = _decode_degree(c["degree"], f"{where}.causes[{i}].degree")
                causes.append(Cause(MethodId(c["method"]), CausalDegree(value, measure)))
            measure = causes[0].degree.measure if causes else MeasureKind(d.get("measure", "difference"))
            degree = CausalDegree(_decode_degree(d.get("degree", 0.0), f"{where}.degree"), measure)
            p_with = ProbabilityEstimate.from_dict(d["p_with"], where=f"{where}.p_with")
            p_without = ProbabilityEstimate.from_dict(d["p_without"], where=f"{where}.p_without")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MalformedInput):
                raise
            raise MalformedInput(f"{where}: {exc}") from None
        return cls(sig, degree, p_with, p_without, tuple(causes))


@dataclass(frozen=True)
class FailureGrouping:
    entries: tuple[GroupEntry, ...] = field(default_factory=tuple)

    def pairs(self) -> set[tuple[FailureSignature, MethodId]]:
        return {(e.signature, c.method) for e in self.entries for c in e.causes}

    def as_map(self) -> dict[FailureSignature, set[MethodId]]:
        return {e.signature: {c.method for c in e.causes} for e in self.entries}

    def grouped(self) -> list[GroupEntry]:
        return [e for e in self.entries if e.causes]

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> FailureGrouping:
        if not isinstance(d, Mapping) or not isinstance(d.get("entries"), list):
            raise MalformedInput("grouping: expected an object with an 'entries' list")
        return cls(tuple(GroupEntry.from_dict(e, f"entries[{i}]") for i, e in enumerate(d["entries"])))


def estimate_do_probability(
    runs: Sequence[TestRunReport],
    target: FailureSignature,
    identity: IdentityMode = IdentityMode.TRACE,
) -> ProbabilityEstimate:
    """Proportion of ``runs`` that fail with ``target`` (under ``identity``)."""
    if not runs:
        raise EmptyPopulation("no runs to estimate from")
    version = runs[0].version_id
    key = target.key(identity)
    failures = 0
    for run in runs:
        if run.version_id != version:
            raise MixedPopulation(f"runs span versions {version!r} and {run.version_id!r}")
        if run.test_id != target.test_id:
            raise MixedPopulation(f"run of test {run.test_id!r} in population for {target.test_id!r}")
        sig = run.failure_signature
        if sig is not None and sig.key(identity) == key:
            failures += 1
    return ProbabilityEstimate(len(runs), failures)


def pearl_causes(p_with: ProbabilityEstimate, p_without: ProbabilityEstimate) -> bool:
    """True iff the intervention strictly raises the failure probability."""
    return p_with.fraction > p_without.fraction


def causal_degree(
    p_with: ProbabilityEstimate, p_without: ProbabilityEstimate, measure: MeasureKind
) -> CausalDegree:
    measure = MeasureKind(measure)
    if measure is MeasureKind.DIFFERENCE:
        return CausalDegree(float(p_with.fraction - p_without.fraction), measure)
    if measure is MeasureKind.RATIO:
        if p_without.n_failures == 0:
            if p_with.n_failures == 0:
                raise UndefinedRatio("both probabilities are zero")
            return CausalDegree(math.inf, measure)
        return CausalDegree(float(p_with.fraction / p_without.fraction), measure)
    raise UnsupportedMeasure("the predicate has no degree; use pearl_causes")


def _check_versions(runs: Iterable[TestRunReport], version: str, label: str) -> None:
    for run in runs:
        if run.version_id != version:
            raise MixedPopulation(f"{label} run has version {run.version_id!r}, expected {version!r}")


def _population(by_test: Mapping[str, list], test_id: str, label: str, minimum: int) -> list:
    runs = by_test.get(test_id)
    if not runs:
        raise EmptyPopulation(f"no {label} runs for test {test_id!r}")
    if len(runs) < minimum:
        raise InsufficientRuns(f"{label} has {len(runs)} runs of {test_id!r}, need {minimum}")
    return runs


def _score(p_with: ProbabilityEstimate, p_without: ProbabilityEstimate, config: GroupingConfig):
    if config.measure is MeasureKind.PEARL:
        degree = CausalDegree(float(p_with.fraction - p_without.fraction), MeasureKind.PEARL)
        return degree, pearl_causes(p_with, p_without)
    degree = causal_degree(p_with, p_without, config.measure)
    return degree, degree.value > config.threshold


def group_failures(
    baseline_runs: Sequence[TestRunReport],
    updated_runs: Sequence[TestRunReport],
    patch: PatchIntervention,
    config: GroupingConfig = GroupingConfig(),
) -> FailureGrouping:
    """Attribute each failure seen in the updated version to its causing methods.

    A failure qualifies when the configured measure clears the threshold
    (for the predicate: when the patch strictly raises its probability). A
    qualifying failure is attributed to every patched method plus the method
    at the top of its stack. Failures that do not qualify are kept with an
    empty cause list so that false groupings can be inspected.
    """
    if not updated_runs:
        raise EmptyPopulation("updated population is empty")
    if not baseline_runs:
        raise EmptyPopulation("baseline population is empty")
    _check_versions(baseline_runs, patch.baseline_version, "baseline")
    _check_versions(updated_runs, patch.updated_version, "updated")

    base_by_test: dict[str, list] = defaultdict(list)
    upd_by_test: dict[str, list] = defaultdict(list)
    for run in baseline_runs:
        base_by_test[run.test_id].append(run)
    for run in updated_runs:
        upd_by_test[run.test_id].append(run)

    # representative signature per identity class: the smallest, so input order is irrelevant
    reps: dict[tuple, FailureSignature] = {}
    for run in updated_runs:
        sig = run.failure_signature
        if sig is None:
            continue
        k = sig.key(config.identity)
        if k not in reps or sig < reps[k]:
            reps[k] = sig

    entries = []
    for k in sorted(reps):
        sig = reps[k]
        upd = _population(upd_by_test, sig.test_id, "updated", config.min_runs_per_version)
        base = _population(base_by_test, sig.test_id, "baseline", config.min_runs_per_version)
        p_with = estimate_do_probability(upd, sig, config.identity)
        p_without = estimate_do_probability(base, sig, config.identity)
        degree, qualifies = _score(p_with, p_without, config)
        causes: tuple[Cause, ...] = ()
        if qualifies:
            methods = set(patch.patched_methods) | {sig.top_method}
            causes = tuple(Cause(m, degree) for m in sorted(methods))
        entries.append(GroupEntry(sig, degree, p_with, p_without, causes))
    return FailureGrouping(tuple(entries))


def split_by_version(runs: Iterable[TestRunReport], patch: PatchIntervention):
    """Partition runs into (baseline, updated); runs of other versions are dropped."""
    base, upd = [], []
    for run in runs:
        if run.version_id == patch.baseline_version:
            base.append(run)
        elif run.version_id == patch.updated_version:
            upd.append(run)
    return base, upd
