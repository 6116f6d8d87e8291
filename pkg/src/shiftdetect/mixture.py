"""Window-limited mixture detector for unknown post-change prevalence.

When the post-change proportion pi_0 is only known to lie in an interval
[a, b], the detector integrates the per-pi_0 plug-in likelihood ratios over
a weight distribution w on quadrature nodes and maximizes over recent
window starts:

    stat_t = max_{t-m <= k <= t}  sum_j w_j * prod_{i=k..t} lr_{pi0_j}(s_i),

alarming when stat_t >= A. The window start k is clipped at 1 and every
candidate product has at least one factor (k = t). All products are carried
as per-node log sums; the weighted combination uses a stable log-sum-exp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import logsumexp

from .core import RunResult
from .ratio import LabelShiftPriors


@dataclass(frozen=True, eq=False)
class MixtureConfig:
    """Quadrature nodes/weights over the candidate interval, window, threshold."""

    nodes: np.ndarray
    weights: np.ndarray
    window_m_alpha: int
    pi_inf: float
    threshold_A: float
    slopes: np.ndarray = field(init=False)
    intercepts: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        nodes = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if nodes.shape != weights.shape or nodes.ndim != 1 or nodes.size == 0:
            raise ValueError("nodes and weights must be equal-length 1-d arrays")
        if np.any(nodes <= 0.0) or np.any(nodes >= 1.0):
            raise ValueError("quadrature nodes must lie in (0, 1)")
        if np.any(weights < 0.0) or not math.isclose(weights.sum(), 1.0, abs_tol=1e-9):
            raise ValueError("weights must be nonnegative and sum to 1")
        if not (0.0 < self.pi_inf < 1.0):
            raise ValueError(f"pi_inf must lie in (0, 1), got {self.pi_inf}")
        if self.window_m_alpha < 1:
            raise ValueError("window_m_alpha must be >= 1")
        if not (self.threshold_A > 0 and math.isfinite(self.threshold_A)):
            raise ValueError("threshold_A must be positive and finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(
            self,
            "slopes",
            nodes / self.pi_inf - (1.0 - nodes) / (1.0 - self.pi_inf),
        )
        object.__setattr__(self, "intercepts", (1.0 - nodes) / (1.0 - self.pi_inf))

    @property
    def n_quad(self) -> int:
        return int(self.nodes.size)

    @property
    def log_threshold(self) -> float:
        return math.log(self.threshold_A)

    @classmethod
    def uniform(cls, pi0_min: float, pi0_max: float, pi_inf: float,
                threshold_A: float, n_quad: int = 21,
                window_m_alpha: int = 200) -> "MixtureConfig":
        """Midpoint-rule nodes, equally spaced on [pi0_min, pi0_max], uniform weight."""
        if not (0.0 < pi0_min <= pi0_max < 1.0):
            raise ValueError("need 0 < pi0_min <= pi0_max < 1")
        if n_quad < 1:
            raise ValueError("n_quad must be >= 1")
        if pi0_min == pi0_max:
            nodes = np.full(n_quad, pi0_min)
        else:
            step = (pi0_max - pi0_min) / n_quad
            nodes = pi0_min + step * (np.arange(n_quad) + 0.5)
        weights = np.full(n_quad, 1.0 / n_quad)
        return cls(nodes=nodes, weights=weights, window_m_alpha=window_m_alpha,
                   pi_inf=pi_inf, threshold_A=threshold_A)

    @classmethod
    def point_mass(cls, pi0: float, pi_inf: float, threshold_A: float,
                   window_m_alpha: int = 200) -> "MixtureConfig":
        return cls(nodes=np.array([pi0]), weights=np.array([1.0]),
                   window_m_alpha=window_m_alpha, pi_inf=pi_inf,
                   threshold_A=threshold_A)

    @classmethod
    def custom(cls, nodes, weights, pi_inf: float, threshold_A: float,
               window_m_alpha: int = 200) -> "MixtureConfig":
        return cls(nodes=np.asarray(nodes, dtype=float),
                   weights=np.asarray(weights, dtype=float),
                   window_m_alpha=window_m_alpha, pi_inf=pi_inf,
                   threshold_A=threshold_A)


@dataclass(frozen=True, eq=False)
class MixtureState:
    """Ring buffer of per-node log ratios for the retained window, plus t."""

    buffer: np.ndarray  # (min(t, window+1), n_quad)
    t: int
    last_log_stat: float


def initial_mixture_state(config: MixtureConfig) -> MixtureState:
    return MixtureState(buffer=np.empty((0, config.n_quad)), t=0,
                        last_log_stat=-math.inf)


def _log_ratio_matrix(scores: np.ndarray, config: MixtureConfig) -> np.ndarray:
    """(n, n_quad) matrix of log lr_{pi0_j}(score_i)."""
    s = np.asarray(scores, dtype=float)
    if np.any(s < 0.0) or np.any(s > 1.0) or not np.all(np.isfinite(s)):
        raise ValueError("score outside [0, 1]")
    return np.log(np.outer(s, config.slopes) + config.intercepts)


def per_pi0_log_ratios(score: float, config: MixtureConfig) -> np.ndarray:
    """Vector of log plug-in ratios at each quadrature node for one score."""
    return _log_ratio_matrix(np.array([score]), config)[0]


def _window_log_statistic(buffer: np.ndarray, config: MixtureConfig) -> float:
    """Statistic from the retained rows: max over starts of weighted node products."""
    suffix = np.cumsum(buffer[::-1], axis=0)[::-1]
    per_start = logsumexp(suffix, axis=1, b=config.weights[None, :])
    return float(per_start.max())


def update_mixture(state: MixtureState, config: MixtureConfig,
                   score: float) -> tuple[MixtureState, float]:
    """Append one score and return the new state and the (linear) statistic.

    The statistic value is exp of the internally held log statistic; for
    extreme window/ratio combinations it may overflow to inf while the log
    form in the returned state stays finite.
    """
    row = per_pi0_log_ratios(score, config)
    keep = config.window_m_alpha  # previous rows retained: window slots minus the new one
    buffer = np.vstack([state.buffer[-keep:], row])
    log_stat = _window_log_statistic(buffer, config)
    new = MixtureState(buffer=buffer, t=state.t + 1, last_log_stat=log_stat)
    return new, math.exp(log_stat) if log_stat < 700.0 else math.inf


def iter_log_stat_blocks(
    score_source: Callable[[int], np.ndarray],
    config: MixtureConfig,
    cap: int,
    block: int = 256,
) -> Iterator[np.ndarray]:
    """Yield blocks of the log statistic trajectory, one value per observation.

    score_source(n) must return up to n scores; returning fewer ends the
    stream. Per-node prefix sums are carried across blocks so each block
    costs O(block * window * n_quad).
    """
    w = config.window_m_alpha
    J = config.n_quad
    # prefix sums C_{t-w}..C_t of per-node log ratios; +inf marks indices < 0
    hist = np.full((w + 1, J), np.inf)
    hist[-1] = 0.0
    running = np.zeros(J)
    total = 0
    while total < cap:
        n_req = min(block, cap - total)
        scores = np.asarray(score_source(n_req), dtype=float)
        n = scores.size
        if n == 0:
            return
        loglr = _log_ratio_matrix(scores, config)
        C_new = running + np.cumsum(loglr, axis=0)
        full = np.vstack([hist, C_new])
        win = sliding_window_view(full, w + 1, axis=0)  # (n+1, J, w+1)
        S = C_new[:, :, None] - win[:n]
        stats = logsumexp(S, axis=1, b=config.weights[:, None])
        yield stats.max(axis=1)
        running = C_new[-1]
        hist = full[-(w + 1):].copy()
        total += n
        if n < n_req:
            return


def mixture_log_stat_trajectory(scores, config: MixtureConfig,
                                block: int = 256) -> np.ndarray:
    """Full log statistic trajectory for a fixed score sequence."""
    arr = np.asarray(scores, dtype=float)
    pos = 0

    def source(n: int) -> np.ndarray:
        nonlocal pos
        out = arr[pos:pos + n]
        pos += len(out)
        return out

    chunks = list(iter_log_stat_blocks(source, config, cap=len(arr), block=block))
    if not chunks:
        return np.empty(0)
    return np.concatenate(chunks)


def run_mixture_detector(config: MixtureConfig, score_stream: Iterable[float],
                         cap: int, block: int = 256) -> RunResult:
    """Run the windowed mixture rule until stat >= A, the cap, or stream end."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    it = iter(score_stream)

    def source(n: int) -> np.ndarray:
        out = []
        for _ in range(n):
            try:
                out.append(next(it))
            except StopIteration:
                break
        return np.asarray(out, dtype=float)

    log_A = config.log_threshold
    t = 0
    last = -math.inf
    for stats in iter_log_stat_blocks(source, config, cap=cap, block=block):
        hits = np.nonzero(stats >= log_A)[0]
        if hits.size:
            i = int(hits[0])
            return RunResult(True, t + i + 1, float(stats[i]), None)
        t += stats.size
        last = float(stats[-1])
    return RunResult(False, t, last, None)
