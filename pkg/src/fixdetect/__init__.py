"""Fix detection for flaky test streams.

Groups failures to the patched methods that cause them, then watches each
method's error-causing degree over time for the changepoint that marks a fix
or a new bug.
"""

from .causal import (
    CausalDegree,
    FailureGrouping,
    GroupingConfig,
    MeasureKind,
    causal_degree,
    estimate_do_probability,
    group_failures,
    pearl_causes,
)
from .core import (
    FailureSignature,
    IdentityMode,
    MethodId,
    Outcome,
    PatchIntervention,
    ProbabilityEstimate,
    TestRunReport,
)
from .cpd import ChangeEvent, ChangeKind, CpdConfig, detect_all, detect_changepoint
from .series import DegreeSeries, build_degree_series, split_series

__version__ = "0.1.0"

__all__ = [
    "CausalDegree",
    "ChangeEvent",
    "ChangeKind",
    "CpdConfig",
    "DegreeSeries",
    "FailureGrouping",
    "FailureSignature",
    "GroupingConfig",
    "IdentityMode",
    "MeasureKind",
    "MethodId",
    "Outcome",
    "PatchIntervention",
    "ProbabilityEstimate",
    "TestRunReport",
    "build_degree_series",
    "causal_degree",
    "detect_all",
    "detect_changepoint",
    "estimate_do_probability",
    "group_failures",
    "pearl_causes",
    "split_series",
]
