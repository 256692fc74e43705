from .offline import (
    ChangeEvent,
    ChangeKind,
    Correction,
    CpdConfig,
    TwoSampleTest,
    detect_all,
    detect_changepoint,
)
from .online import CusumState, cusum_step, run_cusum
from .stattests import ks_exact, ks_p, ks_statistic, mann_whitney_exact, mann_whitney_p

__all__ = [
    "ChangeEvent",
    "ChangeKind",
    "Correction",
    "CpdConfig",
    "CusumState",
    "TwoSampleTest",
    "cusum_step",
    "detect_all",
    "detect_changepoint",
    "ks_exact",
    "ks_p",
    "ks_statistic",
    "mann_whitney_exact",
    "mann_whitney_p",
    "run_cusum",
]
