"""Seeded generator of flaky-test run histories with known ground truth.

Each (bucket, cluster, test, version) cell draws from its own PCG64 stream,
keyed by the scenario seed plus stable hashes of the cluster and test ids.
Adding a test or cluster therefore leaves every other cell's draws intact.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from .core import U64_MAX, FailureSignature, MethodId, Outcome, PatchIntervention, TestRunReport, trace_hash
from .errors import InvalidScenario

DEFAULT_FLAKY_NOISE = 0.05
_SHUFFLE_KEY = 0xFFFF_FFFF


class EventKind(str, enum.Enum):
    FIX = "fix_introduced"
    BUG = "bug_introduced"


@dataclass(frozen=True)
class TestSpec:
    __test__ = False

    test_id: str
    signature: FailureSignature
    baseline_fail_rate: float
    updated_fail_rate: float
    flaky_noise: float = DEFAULT_FLAKY_NOISE


@dataclass(frozen=True)
class GroundTruthEvent:
    at_bucket: int
    kind: EventKind
    affected_test: str
    new_updated_fail_rate: float

    def to_dict(self) -> dict:
        return {
            "at_bucket": self.at_bucket,
            "kind": self.kind.value,
            "affected_test": self.affected_test,
            "new_updated_fail_rate": self.new_updated_fail_rate,
        }


@dataclass(frozen=True)
class ClusterSpec:
    cluster_id: str
    receives_patch: bool = True


@dataclass(frozen=True)
class Scenario:
    seed: int
    duration: int
    tests: tuple[TestSpec, ...]
    runs_per_bucket_per_version: int = 20
    bucket_width: int = 3_600_000
    events: tuple[GroundTruthEvent, ...] = ()
    clusters: tuple[ClusterSpec, ...] = (ClusterSpec("default", True),)
    start_ms: int = 0
    baseline_version: str = "baseline"
    updated_version: str = "updated"
    patched_methods: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        validate_scenario(self)

    def patch(self) -> PatchIntervention:
        if self.patched_methods:
            names = self.patched_methods
        else:
            raised = [t.signature.top_method.name for t in self.tests if t.test_id in _raised_tests(self)]
            names = raised or [t.signature.top_method.name for t in self.tests]
        return PatchIntervention(self.baseline_version, self.updated_version, frozenset(MethodId(n) for n in names))

    def to_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "duration": self.duration,
            "bucket_width_ms": self.bucket_width,
            "runs_per_bucket_per_version": self.runs_per_bucket_per_version,
            "start_ms": self.start_ms,
            "baseline_version": self.baseline_version,
            "updated_version": self.updated_version,
            "tests": [
                {
                    "test_id": t.test_id,
                    "signature": t.signature.to_dict(),
                    "baseline_fail_rate": t.baseline_fail_rate,
                    "updated_fail_rate": t.updated_fail_rate,
                    "flaky_noise": t.flaky_noise,
                }
                for t in self.tests
            ],
            "events": [e.to_dict() for e in self.events],
            "clusters": [{"cluster_id": c.cluster_id, "receives_patch": c.receives_patch} for c in self.clusters],
        }
        if self.patched_methods is not None:
            d["patched_methods"] = list(self.patched_methods)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], strict: bool = True) -> Scenario:
        return _parse_scenario(d, strict)


def _raised_tests(scenario: Scenario) -> set[str]:
    """Tests whose patched failure rate exceeds the baseline at some point."""
    out = set()
    for t in scenario.tests:
        rates = [t.updated_fail_rate] + [e.new_updated_fail_rate for e in scenario.events if e.affected_test == t.test_id]
        if max(rates) > t.baseline_fail_rate:
            out.add(t.test_id)
    return out


def grouping_truth(scenario: Scenario) -> dict[FailureSignature, set[MethodId]]:
    """Ground-truth causes: a failure whose rate the patch raises belongs to its top method."""
    raised = _raised_tests(scenario)
    return {t.signature: {t.signature.top_method} for t in scenario.tests if t.test_id in raised}


# -- validation ----------------------------------------------------------------


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_rate(value, path: str, hi: float = 1.0) -> None:
    if not _is_num(value) or not 0.0 <= value <= hi:
        raise InvalidScenario(path, f"must be a number in [0, {hi}]")


def validate_scenario(s: Scenario) -> None:
    if not _is_int(s.seed) or not 0 <= s.seed <= U64_MAX:
        raise InvalidScenario("seed", "must be an unsigned 64-bit integer")
    if not _is_int(s.duration) or s.duration < 1:
        raise InvalidScenario("duration", "must be a positive integer")
    if not _is_int(s.bucket_width) or s.bucket_width < 1:
        raise InvalidScenario("bucket_width_ms", "must be a positive integer")
    if not _is_int(s.runs_per_bucket_per_version) or s.runs_per_bucket_per_version < 1:
        raise InvalidScenario("runs_per_bucket_per_version", "must be a positive integer")
    if not _is_int(s.start_ms) or s.start_ms < 0:
        raise InvalidScenario("start_ms", "must be a non-negative integer")
    if s.baseline_version == s.updated_version:
        raise InvalidScenario("updated_version", "must differ from baseline_version")
    if not s.tests:
        raise InvalidScenario("tests", "must list at least one test")
    seen = set()
    for i, t in enumerate(s.tests):
        if t.test_id in seen:
            raise InvalidScenario(f"tests[{i}].test_id", f"duplicate test id {t.test_id!r}")
        seen.add(t.test_id)
        if t.signature.test_id != t.test_id:
            raise InvalidScenario(f"tests[{i}].signature.test_id", "must equal the test's test_id")
        _check_rate(t.baseline_fail_rate, f"tests[{i}].baseline_fail_rate")
        _check_rate(t.updated_fail_rate, f"tests[{i}].updated_fail_rate")
        _check_rate(t.flaky_noise, f"tests[{i}].flaky_noise", 0.5)
    for i, e in enumerate(s.events):
        if not _is_int(e.at_bucket) or not 0 <= e.at_bucket < s.duration:
            raise InvalidScenario(f"events[{i}].at_bucket", f"must lie in [0, {s.duration})")
        if e.affected_test not in seen:
            raise InvalidScenario(f"events[{i}].affected_test", f"unknown test {e.affected_test!r}")
        _check_rate(e.new_updated_fail_rate, f"events[{i}].new_updated_fail_rate")
    if not s.clusters:
        raise InvalidScenario("clusters", "must list at least one cluster")
    ids = [c.cluster_id for c in s.clusters]
    if len(set(ids)) != len(ids):
        raise InvalidScenario("clusters", "cluster ids must be unique")
    if s.events and not any(c.receives_patch for c in s.clusters):
        raise InvalidScenario("clusters", "at least one cluster must receive the patch when events exist")
    if s.patched_methods is not None and not s.patched_methods:
        raise InvalidScenario("patched_methods", "must be non-empty when given")


def _get(d: Mapping, key: str, path: str, check, what: str, default=...):
    if key not in d:
        if default is ...:
            raise InvalidScenario(path, "missing")
        return default
    value = d[key]
    if not check(value):
        raise InvalidScenario(path, f"expected {what}")
    return value


def _no_extra(d: Mapping, allowed: set, path: str, strict: bool) -> None:
    if not isinstance(d, Mapping):
        raise InvalidScenario(path or "<root>", "expected an object")
    if strict:
        extra = sorted(set(d) - allowed)
        if extra:
            raise InvalidScenario(f"{path}.{extra[0]}" if path else extra[0], "unknown field")


_is_str = lambda v: isinstance(v, str)  # noqa: E731
_is_list = lambda v: isinstance(v, list)  # noqa: E731


def _parse_scenario(d: Mapping[str, Any], strict: bool) -> Scenario:
    _no_extra(
        d,
        {"seed", "duration", "bucket_width_ms", "runs_per_bucket_per_version", "tests", "events", "clusters",
         "start_ms", "baseline_version", "updated_version", "patched_methods"},
        "",
        strict,
    )
    tests = []
    for i, raw in enumerate(_get(d, "tests", "tests", _is_list, "a list")):
        p = f"tests[{i}]"
        _no_extra(raw, {"test_id", "signature", "baseline_fail_rate", "updated_fail_rate", "flaky_noise"}, p, strict)
        test_id = _get(raw, "test_id", f"{p}.test_id", _is_str, "a string")
        sig_raw = raw.get("signature")
        if sig_raw is None:
            sig = FailureSignature(test_id, MethodId(f"{test_id}.top"), trace_hash([test_id]))
        else:
            sp = f"{p}.signature"
            _no_extra(sig_raw, {"test_id", "top_method", "trace_hash"}, sp, strict)
            top = _get(sig_raw, "top_method", f"{sp}.top_method", lambda v: isinstance(v, str) and v, "a non-empty string")
            h = _get(sig_raw, "trace_hash", f"{sp}.trace_hash", lambda v: _is_int(v) and 0 <= v <= U64_MAX,
                     "an unsigned 64-bit integer", None)
            sig = FailureSignature(
                _get(sig_raw, "test_id", f"{sp}.test_id", _is_str, "a string", test_id),
                MethodId(top),
                trace_hash([top]) if h is None else h,
            )
        tests.append(
            TestSpec(
                test_id,
                sig,
                _get(raw, "baseline_fail_rate", f"{p}.baseline_fail_rate", _is_num, "a number"),
                _get(raw, "updated_fail_rate", f"{p}.updated_fail_rate", _is_num, "a number"),
                _get(raw, "flaky_noise", f"{p}.flaky_noise", _is_num, "a number", DEFAULT_FLAKY_NOISE),
            )
        )
    events = []
    for i, raw in enumerate(_get(d, "events", "events", _is_list, "a list", [])):
        p = f"events[{i}]"
        _no_extra(raw, {"at_bucket", "kind", "affected_test", "new_updated_fail_rate"}, p, strict)
        kind = _get(raw, "kind", f"{p}.kind", lambda v: v in {k.value for k in EventKind},
                    "'fix_introduced' or 'bug_introduced'")
        events.append(
            GroundTruthEvent(
                _get(raw, "at_bucket", f"{p}.at_bucket", _is_int, "an integer"),
                EventKind(kind),
                _get(raw, "affected_test", f"{p}.affected_test", _is_str, "a string"),
                _get(raw, "new_updated_fail_rate", f"{p}.new_updated_fail_rate", _is_num, "a number"),
            )
        )
    clusters = []
    for i, raw in enumerate(_get(d, "clusters", "clusters", _is_list, "a list", [])):
        p = f"clusters[{i}]"
        _no_extra(raw, {"cluster_id", "receives_patch"}, p, strict)
        clusters.append(
            ClusterSpec(
                _get(raw, "cluster_id", f"{p}.cluster_id", _is_str, "a string"),
                _get(raw, "receives_patch", f"{p}.receives_patch", lambda v: isinstance(v, bool), "a boolean", True),
            )
        )
    patched = _get(d, "patched_methods", "patched_methods",
                   lambda v: _is_list(v) and all(isinstance(m, str) and m for m in v), "a list of method names", None)
    return Scenario(
        seed=_get(d, "seed", "seed", _is_int, "an integer"),
        duration=_get(d, "duration", "duration", _is_int, "an integer"),
        tests=tuple(tests),
        runs_per_bucket_per_version=_get(d, "runs_per_bucket_per_version", "runs_per_bucket_per_version", _is_int,
                                         "an integer", 20),
        bucket_width=_get(d, "bucket_width_ms", "bucket_width_ms", _is_int, "an integer", 3_600_000),
        events=tuple(events),
        clusters=tuple(clusters) or (ClusterSpec("default", True),),
        start_ms=_get(d, "start_ms", "start_ms", _is_int, "an integer", 0),
        baseline_version=_get(d, "baseline_version", "baseline_version", _is_str, "a string", "baseline"),
        updated_version=_get(d, "updated_version", "updated_version", _is_str, "a string", "updated"),
        patched_methods=None if patched is None else tuple(patched),
    )


# -- generation ----------------------------------------------------------------


def _stable_id(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=4).digest(), "big")


def cell_rng(seed: int, bucket: int, cluster_id: str, test_id: str, version_slot: int) -> np.random.Generator:
    """Independent PCG64 stream for one (bucket, cluster, test, version) cell."""
    ss = np.random.SeedSequence(seed, spawn_key=(bucket, _stable_id(cluster_id), _stable_id(test_id), version_slot))
    return np.random.Generator(np.random.PCG64(ss))


def active_rates(scenario: Scenario) -> list[dict[str, float]]:
    """Patched-version failure rate of every test in every bucket."""
    current = {t.test_id: t.updated_fail_rate for t in scenario.tests}
    by_bucket: dict[int, list[GroundTruthEvent]] = {}
    for e in scenario.events:
        by_bucket.setdefault(e.at_bucket, []).append(e)
    out = []
    for b in range(scenario.duration):
        for e in by_bucket.get(b, ()):
            current[e.affected_test] = e.new_updated_fail_rate
        out.append(dict(current))
    return out


def simulate(scenario: Scenario) -> tuple[list[TestRunReport], list[GroundTruthEvent]]:
    """Draw every run of the scenario; returns (shuffled runs, sorted ground-truth events).

    Every cluster runs the baseline version; clusters that receive the patch
    also run the updated version. Within a bucket each cell jitters its rate
    uniformly by up to ``flaky_noise``, clamps it to [0, 1], and draws
    Bernoulli outcomes.
    """
    s = scenario
    n = s.runs_per_bucket_per_version
    offsets = [i * s.bucket_width // n for i in range(n)]
    rates = active_rates(s)
    runs: list[TestRunReport] = []
    for b in range(s.duration):
        t_bucket = s.start_ms + b * s.bucket_width
        for cluster in s.clusters:
            for test in s.tests:
                arms = [(0, s.baseline_version, test.baseline_fail_rate)]
                if cluster.receives_patch:
                    arms.append((1, s.updated_version, rates[b][test.test_id]))
                for slot, version, rate in arms:
                    rng = cell_rng(s.seed, b, cluster.cluster_id, test.test_id, slot)
                    jitter = rng.uniform(-test.flaky_noise, test.flaky_noise)
                    p = min(1.0, max(0.0, rate + jitter))
                    fails = (rng.random(n) < p).tolist()
                    for off, failed in zip(offsets, fails):
                        runs.append(
                            TestRunReport(
                                t_bucket + off,
                                version,
                                test.test_id,
                                Outcome.FAIL if failed else Outcome.PASS,
                                test.signature if failed else None,
                                cluster.cluster_id,
                            )
                        )
    order = np.random.Generator(np.random.PCG64(np.random.SeedSequence(s.seed, spawn_key=(_SHUFFLE_KEY,))))
    perm = order.permutation(len(runs))
    shuffled = [runs[i] for i in perm.tolist()]
    truth = sorted(s.events, key=lambda e: e.at_bucket)
    return shuffled, truth


def truth_document(scenario: Scenario) -> dict:
    """Ground truth as written next to the runs file."""
    events = sorted(scenario.events, key=lambda e: e.at_bucket)
    grouping = grouping_truth(scenario)
    return {
        "patch": scenario.patch().to_dict(),
        "bucket_width_ms": scenario.bucket_width,
        "start_ms": scenario.start_ms,
        "events": [e.to_dict() for e in events],
        "grouping": [
            {"signature": sig.to_dict(), "methods": sorted(m.name for m in methods)}
            for sig, methods in sorted(grouping.items())
        ],
    }


def single_test_scenario(
    seed: int,
    duration: int,
    baseline_fail_rate: float,
    updated_fail_rate: float,
    runs_per_bucket_per_version: int = 20,
    flaky_noise: float = DEFAULT_FLAKY_NOISE,
    events: tuple[tuple[int, float], ...] = (),
    test_id: str = "t1",
    top_method: str = "m1",
    extra_tests: tuple[TestSpec, ...] = (),
    clusters: tuple[ClusterSpec, ...] = (ClusterSpec("default", True),),
) -> Scenario:
    """Convenience builder: one patched test plus optional bystanders.

    ``events`` are (bucket, new patched rate) pairs; each is labelled a fix or
    a bug by whether it lowers or raises the rate in force before it.
    """
    sig = FailureSignature(test_id, MethodId(top_method), trace_hash([top_method, test_id]))
    current = updated_fail_rate
    gt = []
    for at, rate in sorted(events):
        kind = EventKind.FIX if rate < current else EventKind.BUG
        gt.append(GroundTruthEvent(at, kind, test_id, rate))
        current = rate
    return Scenario(
        seed=seed,
        duration=duration,
        tests=(TestSpec(test_id, sig, baseline_fail_rate, updated_fail_rate, flaky_noise),) + tuple(extra_tests),
        runs_per_bucket_per_version=runs_per_bucket_per_version,
        events=tuple(gt),
        clusters=clusters,
        patched_methods=(top_method,),
    )
