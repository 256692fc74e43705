"""Domain records for test-run observations and their JSON encodings.

Every record is an immutable value. ``to_dict``/``from_dict`` give a lossless
round trip; ``from_dict`` is strict by default and rejects unknown keys.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Iterator, Mapping, Optional

from .errors import MalformedInput

U64_MAX = 2**64 - 1


class Outcome(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"


class IdentityMode(str, enum.Enum):
    """Which signature fields decide that two failures are the same."""

    TRACE = "trace"
    TEST_METHOD = "test_method"


def _check_keys(d: Mapping[str, Any], allowed: tuple[str, ...], where: str, strict: bool) -> None:
    if not isinstance(d, Mapping):
        raise MalformedInput(f"{where}: expected an object, got {type(d).__name__}")
    if strict:
        extra = sorted(set(d) - set(allowed))
        if extra:
            raise MalformedInput(f"{where}: unknown field(s) {', '.join(extra)}")


def _require(d: Mapping[str, Any], key: str, kind: type | tuple, where: str) -> Any:
    if key not in d:
        raise MalformedInput(f"{where}.{key}: missing")
    value = d[key]
    # bool is an int subclass; never accept it where a number is expected
    if isinstance(value, bool) and kind is not bool:
        raise MalformedInput(f"{where}.{key}: expected {_kind_name(kind)}, got bool")
    if not isinstance(value, kind):
        raise MalformedInput(f"{where}.{key}: expected {_kind_name(kind)}, got {type(value).__name__}")
    return value


def _kind_name(kind: type | tuple) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


@dataclass(frozen=True, order=True, slots=True)
class MethodId:
    name: str

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not self.name:
            raise ValueError("MethodId name must be a non-empty string")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True, slots=True)
class FailureSignature:
    test_id: str
    top_method: MethodId
    trace_hash: int

    def __post_init__(self) -> None:
        if not isinstance(self.test_id, str):
            raise ValueError("test_id must be a string")
        if not isinstance(self.top_method, MethodId):
            raise ValueError("top_method must be a MethodId")
        if not (isinstance(self.trace_hash, int) and 0 <= self.trace_hash <= U64_MAX):
            raise ValueError("trace_hash must be an unsigned 64-bit integer")

    def key(self, mode: IdentityMode = IdentityMode.TRACE) -> tuple:
        if mode is IdentityMode.TEST_METHOD:
            return (self.test_id, self.top_method.name)
        return (self.test_id, self.top_method.name, self.trace_hash)

    def to_dict(self) -> dict:
        return {"test_id": self.test_id, "top_method": self.top_method.name, "trace_hash": self.trace_hash}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], strict: bool = True, where: str = "signature") -> FailureSignature:
        _check_keys(d, ("test_id", "top_method", "trace_hash"), where, strict)
        test_id = _require(d, "test_id", str, where)
        top = _require(d, "top_method", str, where)
        h = _require(d, "trace_hash", int, where)
        if not top:
            raise MalformedInput(f"{where}.top_method: must be non-empty")
        if not 0 <= h <= U64_MAX:
            raise MalformedInput(f"{where}.trace_hash: out of unsigned 64-bit range")
        return cls(test_id, MethodId(top), h)


def trace_hash(methods: Iterable[str]) -> int:
    """Stable 64-bit hash of a stack trace given as a method-name list (top first)."""
    digest = hashlib.blake2b("\n".join(methods).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


_RUN_FIELDS = ("timestamp", "version_id", "cluster_id", "test_id", "outcome", "failure_signature")


@dataclass(frozen=True, slots=True)
class TestRunReport:
    """One execution of one test on one code version."""

    __test__ = False  # keep pytest from collecting this class

    timestamp: int
    version_id: str
    test_id: str
    outcome: Outcome
    failure_signature: Optional[FailureSignature] = None
    cluster_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not isinstance(self.timestamp, int) or isinstance(self.timestamp, bool) or self.timestamp < 0:
            raise ValueError("timestamp must be a non-negative integer")
        if not isinstance(self.outcome, Outcome):
            raise ValueError("outcome must be an Outcome")
        failed = self.outcome is Outcome.FAIL
        if failed != (self.failure_signature is not None):
            raise ValueError("failure_signature must be present iff outcome is fail")

    @property
    def failed(self) -> bool:
        return self.outcome is Outcome.FAIL

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "version_id": self.version_id,
            "cluster_id": self.cluster_id,
            "test_id": self.test_id,
            "outcome": self.outcome.value,
            "failure_signature": None if self.failure_signature is None else self.failure_signature.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], strict: bool = True, where: str = "run") -> TestRunReport:
        _check_keys(d, _RUN_FIELDS, where, strict)
        ts = _require(d, "timestamp", int, where)
        if ts < 0:
            raise MalformedInput(f"{where}.timestamp: must be >= 0")
        version = _require(d, "version_id", str, where)
        test_id = _require(d, "test_id", str, where)
        raw_outcome = _require(d, "outcome", str, where)
        try:
            outcome = Outcome(raw_outcome)
        except ValueError:
            raise MalformedInput(f"{where}.outcome: expected 'pass' or 'fail', got {raw_outcome!r}") from None
        cluster = d.get("cluster_id")
        if cluster is not None and not isinstance(cluster, str):
            raise MalformedInput(f"{where}.cluster_id: expected str or null")
        raw_sig = d.get("failure_signature")
        sig = None
        if raw_sig is not None:
            sig = FailureSignature.from_dict(raw_sig, strict, f"{where}.failure_signature")
        if (outcome is Outcome.FAIL) != (sig is not None):
            raise MalformedInput(f"{where}.failure_signature: required iff outcome is 'fail'")
        return cls(ts, version, test_id, outcome, sig, cluster)


@dataclass(frozen=True, slots=True)
class PatchIntervention:
    baseline_version: str
    updated_version: str
    patched_methods: frozenset[MethodId]

    def __post_init__(self) -> None:
        if self.baseline_version == self.updated_version:
            raise ValueError("baseline_version and updated_version must differ")
        if not self.patched_methods:
            raise ValueError("patched_methods must be non-empty")

    def to_dict(self) -> dict:
        return {
            "baseline_version": self.baseline_version,
            "updated_version": self.updated_version,
            "patched_methods": sorted(m.name for m in self.patched_methods),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], strict: bool = True, where: str = "patch") -> PatchIntervention:
        _check_keys(d, ("baseline_version", "updated_version", "patched_methods"), where, strict)
        base = _require(d, "baseline_version", str, where)
        upd = _require(d, "updated_version", str, where)
        methods = _require(d, "patched_methods", list, where)
        if not methods or not all(isinstance(m, str) and m for m in methods):
            raise MalformedInput(f"{where}.patched_methods: expected a non-empty list of method names")
        if base == upd:
            raise MalformedInput(f"{where}.updated_version: must differ from baseline_version")
        return cls(base, upd, frozenset(MethodId(m) for m in methods))


@dataclass(frozen=True, slots=True)
class ProbabilityEstimate:
    """Failure proportion ``n_failures / n_runs`` with the counts kept."""

    n_runs: int
    n_failures: int

    def __post_init__(self) -> None:
        if self.n_runs < 1 or not 0 <= self.n_failures <= self.n_runs:
            raise ValueError(f"invalid counts: {self.n_failures}/{self.n_runs}")

    @property
    def p(self) -> float:
        return self.n_failures / self.n_runs

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.n_failures, self.n_runs)

    def to_dict(self) -> dict:
        return {"p": self.p, "n_runs": self.n_runs, "n_failures": self.n_failures}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], strict: bool = True, where: str = "estimate") -> ProbabilityEstimate:
        _check_keys(d, ("p", "n_runs", "n_failures"), where, strict)
        n = _require(d, "n_runs", int, where)
        k = _require(d, "n_failures", int, where)
        try:
            est = cls(n, k)
        except ValueError as exc:
            raise MalformedInput(f"{where}: {exc}") from None
        if "p" in d and d["p"] != est.p:
            raise MalformedInput(f"{where}.p: does not equal n_failures / n_runs")
        return est


def dumps_run(run: TestRunReport) -> str:
    return json.dumps(run.to_dict(), separators=(",", ":"))


def write_runs_jsonl(runs: Iterable[TestRunReport], fh) -> None:
    for run in runs:
        fh.write(dumps_run(run))
        fh.write("\n")


def iter_runs_jsonl(lines: Iterable[str], strict: bool = True) -> Iterator[TestRunReport]:
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"line {lineno}: invalid JSON ({exc.msg})") from None
        yield TestRunReport.from_dict(obj, strict, where=f"line {lineno}")


def read_runs_jsonl(path, strict: bool = True) -> list[TestRunReport]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_runs_jsonl(fh, strict))
