"""Two-sided CUSUM for streaming degree observations."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..errors import InvalidParameter
from .offline import ChangeKind


@dataclass
class CusumState:
    """Mutable detector state. One stream owns one state."""

    mu0: float
    kappa: float
    h: float
    min_segment: int = 5
    s_plus: float = 0.0
    s_minus: float = 0.0
    n_seen: int = 0
    recent: deque = field(default_factory=deque, repr=False)

    def __post_init__(self) -> None:
        if self.h <= 0:
            raise InvalidParameter("threshold h must be positive")
        if self.kappa < 0:
            raise InvalidParameter("slack kappa must be non-negative")
        if self.min_segment < 1:
            raise InvalidParameter("min_segment must be positive")
        self.recent = deque(self.recent, maxlen=self.min_segment)


def cusum_step(state: CusumState, x: float) -> tuple[CusumState, Optional[ChangeKind]]:
    """Feed one observation; returns the (updated) state and an alarm if one fired.

    An upward drift alarms as a bug, a downward drift as a fix. After an alarm
    both sums restart from zero around the mean of the last ``min_segment``
    observations.
    """
    state.s_plus = max(0.0, state.s_plus + (x - state.mu0 - state.kappa))
    state.s_minus = max(0.0, state.s_minus + (state.mu0 - x - state.kappa))
    state.recent.append(x)
    state.n_seen += 1

    alarm = None
    up, down = state.s_plus > state.h, state.s_minus > state.h
    if up and (not down or state.s_plus >= state.s_minus):
        alarm = ChangeKind.BUG
    elif down:
        alarm = ChangeKind.FIX
    if alarm is not None:
        state.s_plus = state.s_minus = 0.0
        state.mu0 = sum(state.recent) / len(state.recent)
    return state, alarm


def run_cusum(
    stream: Iterable[float], mu0: float, kappa: float, h: float, min_segment: int = 5
) -> list[tuple[int, ChangeKind]]:
    """Replay a whole stream; returns (0-based observation index, alarm) pairs."""
    state = CusumState(mu0, kappa, h, min_segment)
    alarms = []
    for i, x in enumerate(stream):
        _, alarm = cusum_step(state, x)
        if alarm is not None:
            alarms.append((i, alarm))
    return alarms
