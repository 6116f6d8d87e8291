"""Recursive detection statistics over a stream of likelihood-ratio values.

Implements the classic one-sided changepoint statistics

    R_t = Psi(R_{t-1}) * lr_t,      R_0 = x,

with update function Psi(r) = max(1, r) (CUSUM, default x = 1) or
Psi(r) = 1 + r (Shiryaev-Roberts, default x = 0), and the stopping rule

    T = inf { t >= 1 : R_t >= A }.

The statistic is carried in the log domain so that long runs (average run
lengths in the hundreds to thousands) never overflow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional


class UpdateRule(enum.Enum):
    """Update function Psi applied to the previous statistic value."""

    CUSUM = "cusum"
    SHIRYAEV_ROBERTS = "sr"

    def log_psi(self, log_stat: float) -> float:
        """log Psi(exp(log_stat)), stable for any finite or -inf input."""
        if self is UpdateRule.CUSUM:
            return max(0.0, log_stat)
        # log(1 + r) with r = exp(log_stat); stable softplus branches
        if log_stat > 35.0:
            return log_stat
        return math.log1p(math.exp(log_stat))

    @property
    def default_init(self) -> float:
        return 1.0 if self is UpdateRule.CUSUM else 0.0


@dataclass(frozen=True)
class DetectorConfig:
    """Threshold rule T(A) for one recursive detector.

    init_x defaults to 1 for CUSUM and 0 for Shiryaev-Roberts.
    """

    rule: UpdateRule
    threshold_A: float
    init_x: Optional[float] = None

    def __post_init__(self) -> None:
        if self.init_x is None:
            object.__setattr__(self, "init_x", self.rule.default_init)
        if not (self.threshold_A > 0 and math.isfinite(self.threshold_A)):
            raise ValueError(f"threshold_A must be positive and finite, got {self.threshold_A}")
        if self.init_x < 0:
            raise ValueError(f"init_x must be nonnegative, got {self.init_x}")
        if not self.threshold_A > self.init_x:
            raise ValueError(
                f"threshold_A={self.threshold_A} must exceed init_x={self.init_x}"
            )

    @property
    def log_threshold(self) -> float:
        return math.log(self.threshold_A)

    @property
    def init_log_stat(self) -> float:
        return math.log(self.init_x) if self.init_x > 0 else -math.inf


@dataclass(frozen=True)
class DetectorState:
    """Current statistic (log R_t) and the number of observations consumed."""

    log_stat: float
    t: int = 0


@dataclass(frozen=True)
class RunResult:
    """Outcome of running a detector over a stream.

    stopped=False means the run was censored: either the cap was reached or
    the stream ended first; stopping_time_T then carries the number of
    observations consumed.
    """

    stopped: bool
    stopping_time_T: int
    final_log_stat: float
    trajectory: Optional[list[float]] = field(default=None)


def initial_state(config: DetectorConfig) -> DetectorState:
    return DetectorState(log_stat=config.init_log_stat, t=0)


def update_detector(
    state: DetectorState, config: DetectorConfig, lr: float
) -> DetectorState:
    """One step of R_t = Psi(R_{t-1}) * lr in the log domain.

    Raises ValueError for nonpositive or non-finite lr, which signals a
    broken ratio model upstream.
    """
    if not (lr > 0 and math.isfinite(lr)):
        raise ValueError(f"likelihood ratio must be positive and finite, got {lr}")
    new_log = config.rule.log_psi(state.log_stat) + math.log(lr)
    return DetectorState(log_stat=new_log, t=state.t + 1)


def run_detector(
    config: DetectorConfig,
    lr_stream: Iterable[float],
    cap: int,
    record_trajectory: bool = False,
) -> RunResult:
    """Consume lr values until R_t >= A or the cap / end of stream.

    The crossing test is inclusive (R_t >= A). If the cap is reached or the
    stream is exhausted without a crossing, the result is censored with
    stopping_time_T equal to the number of observations consumed.
    """
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    state = initial_state(config)
    log_A = config.log_threshold
    traj: Optional[list[float]] = [] if record_trajectory else None
    for lr in lr_stream:
        state = update_detector(state, config, lr)
        if traj is not None:
            traj.append(state.log_stat)
        if state.log_stat >= log_A:
            return RunResult(True, state.t, state.log_stat, traj)
        if state.t >= cap:
            break
    return RunResult(False, state.t, state.log_stat, traj)
