"""End-to-end fix detection: group failures, build degree series, find changes."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .causal import GroupingConfig, MeasureKind, group_failures, split_by_version
from .core import IdentityMode, PatchIntervention, TestRunReport
from .cpd import ChangeKind, CpdConfig, detect_all
from .errors import EmptySeries, MalformedInput
from .series import DEFAULT_BUCKET_WIDTH_MS, DEFAULT_MIN_RUNS_PER_BUCKET, build_degree_series

DEFAULT_FIXED_MEAN_CEILING = 0.05


@dataclass(frozen=True)
class PipelineConfig:
    grouping: GroupingConfig = field(default_factory=GroupingConfig)
    cpd: CpdConfig = field(default_factory=CpdConfig)
    bucket_width: int = DEFAULT_BUCKET_WIDTH_MS
    min_runs_per_bucket: int = DEFAULT_MIN_RUNS_PER_BUCKET
    fixed_mean_ceiling: float = DEFAULT_FIXED_MEAN_CEILING

    def __post_init__(self) -> None:
        if self.bucket_width < 1:
            raise ValueError("bucket_width must be positive")
        if self.min_runs_per_bucket < 1:
            raise ValueError("min_runs_per_bucket must be positive")

    @property
    def identity_mode(self) -> IdentityMode:
        return self.grouping.identity

    def to_dict(self) -> dict:
        grouping = self.grouping.to_dict()
        identity = grouping.pop("identity")
        return {
            "grouping": grouping,
            "cpd": self.cpd.to_dict(),
            "bucket_width_ms": self.bucket_width,
            "min_runs_per_bucket": self.min_runs_per_bucket,
            "identity_mode": identity,
            "fixed_mean_ceiling": self.fixed_mean_ceiling,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
        """Build from a config document; non-None ``overrides`` win over file values.

        Override keys: measure, threshold, min_runs_per_version, identity_mode,
        alpha, min_segment, test, stride, correction, bucket_width_ms,
        min_runs_per_bucket, fixed_mean_ceiling.
        """
        allowed = {"grouping", "cpd", "bucket_width_ms", "min_runs_per_bucket", "identity_mode", "fixed_mean_ceiling"}
        if not isinstance(d, Mapping):
            raise MalformedInput("config: expected an object")
        unknown = set(d) - allowed
        if unknown:
            raise MalformedInput(f"config.{sorted(unknown)[0]}: unknown field")
        g = dict(d.get("grouping", {}))
        bad = set(g) - {"measure", "threshold", "min_runs_per_version"}
        if bad:
            raise MalformedInput(f"config.grouping.{sorted(bad)[0]}: unknown field")
        c = dict(d.get("cpd", {}))
        top = {k: d[k] for k in ("bucket_width_ms", "min_runs_per_bucket", "identity_mode", "fixed_mean_ceiling") if k in d}
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key in ("measure", "threshold", "min_runs_per_version"):
                g[key] = value
            elif key in ("alpha", "min_segment", "test", "stride", "correction"):
                c[key] = value
            else:
                top[key] = value
        if "measure" in g and "threshold" not in g:
            g["threshold"] = None
        try:
            grouping = GroupingConfig(
                measure=MeasureKind(g.get("measure", MeasureKind.DIFFERENCE)),
                threshold=g.get("threshold"),
                min_runs_per_version=int(g.get("min_runs_per_version", 10)),
                identity=IdentityMode(top.get("identity_mode", IdentityMode.TRACE)),
            )
            return cls(
                grouping=grouping,
                cpd=CpdConfig.from_dict(c),
                bucket_width=int(top.get("bucket_width_ms", DEFAULT_BUCKET_WIDTH_MS)),
                min_runs_per_bucket=int(top.get("min_runs_per_bucket", DEFAULT_MIN_RUNS_PER_BUCKET)),
                fixed_mean_ceiling=float(top.get("fixed_mean_ceiling", DEFAULT_FIXED_MEAN_CEILING)),
            )
        except MalformedInput:
            raise
        except (TypeError, ValueError) as exc:
            raise MalformedInput(f"config: {exc}") from None


def verdict(events, tail_mean: float, ceiling: float) -> str:
    """``fixed`` needs a final fix and a tail mean below ``ceiling``."""
    if not events:
        return "unchanged"
    if events[-1].kind is ChangeKind.BUG:
        return "regressed"
    return "fixed" if tail_mean < ceiling else "improved"


def run_pipeline(
    runs: Sequence[TestRunReport], patch: PatchIntervention, config: PipelineConfig = PipelineConfig()
) -> dict:
    baseline, updated = split_by_version(runs, patch)
    grouping = group_failures(baseline, updated, patch, config.grouping)

    per_method: dict[str, list[dict]] = {}
    for entry in grouping.grouped():
        sig = entry.signature
        try:
            series = build_degree_series(
                baseline, updated, patch, sig, entry.causes[0].method,
                config.bucket_width, config.min_runs_per_bucket, config.identity_mode,
            )
        except EmptySeries:
            series = None
        if series is None:
            events, degrees = [], []
        else:
            events = detect_all(series, config.cpd)
            degrees = series.degrees
        tail = degrees[events[-1].index:] if events else degrees
        tail_mean = math.fsum(tail) / len(tail) if tail else None
        row = {
            "signature": sig.to_dict(),
            "grouping_degree": entry.degree.value if math.isfinite(entry.degree.value) else "inf",
            "n_points": len(degrees),
            "events": [e.to_dict() for e in events],
            "tail_mean": tail_mean,
            "verdict": "insufficient_data" if series is None else verdict(events, tail_mean, config.fixed_mean_ceiling),
        }
        for cause in entry.causes:
            per_method.setdefault(cause.method.name, []).append(row)

    return {
        "config": config.to_dict(),
        "patch": patch.to_dict(),
        "methods": [
            {
                "method": name,
                "signatures": sorted(rows, key=lambda r: (r["signature"]["test_id"], r["signature"]["top_method"],
                                                          r["signature"]["trace_hash"])),
            }
            for name, rows in sorted(per_method.items())
        ],
    }


def dumps_report(report: Mapping) -> str:
    return json.dumps(report, indent=2) + "\n"
