"""Observables and analytical constants of the dynamics.

The central observable is the opinion diameter d(t) = max_i x_i - min_i
x_i. Synchronization is read off ensembles of diameter series: the mean
verdict asks whether the ensemble mean diameter (plus a confidence
half-width) stays below the confidence threshold over a tail window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import ModelConfig
from .sampling import CommunicationRule

__all__ = [
    "diameter",
    "extremal_agents",
    "extremes_communicating",
    "prob_extremes_communicating",
    "stopping_time",
    "TheoryConstants",
    "theory_constants",
    "smallest_window_count",
    "EnsembleStats",
    "ensemble_mean_diameter",
    "RunningStats",
    "QuasiSyncVerdict",
    "check_quasi_sync_in_mean",
]

# Confidence half-widths use a 3-sigma normal band by convention.
DEFAULT_Z = 3.0


def _values(state) -> np.ndarray:
    return np.asarray(getattr(state, "values", state), dtype=float)


def diameter(state) -> float:
    """Largest pairwise opinion distance max_i x_i - min_i x_i."""
    x = _values(state)
    return float(x.max() - x.min())


def extremal_agents(state) -> tuple[int, int]:
    """(argmin, argmax) agent indices, ties broken by lowest index."""
    x = _values(state)
    return int(np.argmin(x)), int(np.argmax(x))


def extremes_communicating(state, comm_set) -> bool:
    """True iff both the minimum and maximum agents are in the communicating set."""
    m, big = extremal_agents(state)
    comm = set(int(i) for i in np.asarray(comm_set, dtype=np.intp).ravel())
    return m in comm and big in comm


def prob_extremes_communicating(rule: CommunicationRule, n: int) -> float:
    """Exact probability that two fixed distinct agents both communicate.

    Equals sum over k >= 2 of p_k * k(k-1) / (n(n-1)); at least
    2(1 - p_0 - p_1) / (n(n-1)) for every valid rule.
    """
    rule.validate_for(n)
    probs = rule.size_probs
    return float(
        sum(probs[k] * k * (k - 1) for k in range(2, n + 1)) / (n * (n - 1))
    )


def stopping_time(series: Sequence[float], threshold: float) -> int | None:
    """Smallest step index t with series[t] <= threshold, or None."""
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    hits = np.nonzero(np.asarray(series, dtype=float) <= threshold)[0]
    return int(hits[0]) if hits.size else None


def smallest_window_count(q: float, target: float, cap: int) -> int:
    """Smallest integer l >= 1 with (1 - q)^l <= target, q in (0, 1].

    Integer search done by a log-domain bisection around the analytic
    candidate so huge counts fail fast against the cap instead of
    hanging. Raises when no count <= cap exists (including the case
    where q underflows and 1 - q rounds to 1).
    """
    if not (0.0 < target):
        raise ValueError("target must be positive")
    if q >= 1.0:
        return 1
    log_fail = math.log1p(-q) if q > 0.0 else 0.0
    if log_fail == 0.0:
        raise ValueError(
            f"window count exceeds the cap {cap}: the per-window success "
            f"probability underflows double precision entirely"
        )
    log_target = math.log(target)
    if log_fail <= log_target:
        return 1
    candidate = log_target / log_fail
    if candidate > cap:
        raise ValueError(
            f"window count exceeds the cap {cap}: roughly {candidate:.3e} windows "
            f"would be needed at per-window success probability {q:.3e}"
        )
    candidate = max(1, math.ceil(candidate))
    while candidate > 1 and (candidate - 1) * log_fail <= log_target:
        candidate -= 1
    while candidate * log_fail > log_target:
        candidate += 1
        if candidate > cap:
            raise ValueError(
                f"window count exceeds the cap {cap} after boundary adjustment"
            )
    return candidate


@dataclass(frozen=True)
class TheoryConstants:
    """Analytical quantities controlling synchronization in mean.

    contraction_window   steps the analysis keeps both extremes active, n(n-1)/2
    extremes_prob_floor  lower bound on P{both extremes communicate}
    window_count         windows needed so the all-fail probability <= mu*eps/2
    noise_ceiling        noise amplitude below which the mean verdict is guaranteed
    escape_steps         protocol steps to force full spread, ceil(1/protocol_floor)
    protocol_floor       minimum magnitude a noise protocol may emit
    band_prob            per-agent probability mass of one protocol band
    """

    contraction_window: int
    extremes_prob_floor: float
    window_count: int
    noise_ceiling: float
    mu: float
    lam: float
    escape_steps: int
    protocol_floor: float
    band_prob: float

    def as_dict(self) -> dict:
        return {
            "contraction_window": self.contraction_window,
            "extremes_prob_floor": self.extremes_prob_floor,
            "window_count": self.window_count,
            "noise_ceiling": self.noise_ceiling,
            "mu": self.mu,
            "lambda": self.lam,
            "escape_steps": self.escape_steps,
            "protocol_floor": self.protocol_floor,
            "band_prob": self.band_prob,
        }


def theory_constants(
    mu: float,
    lam: float,
    config: ModelConfig,
    *,
    window_cap: int = 10**6,
) -> TheoryConstants:
    """Evaluate the synchronization constants for a configuration.

    mu scales the target mean diameter (mu * epsilon); lam scales the
    region the stopping time must reach (lam * epsilon).
    """
    if not (0.0 < mu <= 1.0):
        raise ValueError("mu must lie in (0, 1]")
    if not (0.0 < lam <= 1.0):
        raise ValueError("lambda must lie in (0, 1]")
    n = config.n
    probs = config.comm.size_probs
    contraction_window = n * (n - 1) // 2
    prob_floor = 2.0 * (1.0 - probs[0] - probs[1]) / (n * (n - 1))
    if prob_floor <= 0.0:
        raise ValueError("p_0 + p_1 = 1 leaves no chance of both extremes communicating")
    log_q = contraction_window * math.log(prob_floor) if prob_floor < 1.0 else 0.0
    q = math.exp(log_q)
    count = smallest_window_count(q, mu * config.epsilon / 2.0, window_cap)
    ceiling = min(
        config.alpha * mu * config.epsilon / (2.0 * n * (n - 1) ** 2),
        mu * config.epsilon / (8.0 * (1.0 + contraction_window * count)),
    )
    floor, band = config.noise.protocol_band()
    return TheoryConstants(
        contraction_window=contraction_window,
        extremes_prob_floor=prob_floor,
        window_count=count,
        noise_ceiling=ceiling,
        mu=mu,
        lam=lam,
        escape_steps=math.ceil(1.0 / floor),
        protocol_floor=floor,
        band_prob=band,
    )


@dataclass
class RunningStats:
    """Mergeable per-step moment accumulator over replica series.

    Supports an associative, commutative combine so replica series can be
    reduced in any order; merging in replica order reproduces the
    sequential fold bit for bit.
    """

    count: int
    mean: np.ndarray
    m2: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def from_series(cls, series: np.ndarray) -> "RunningStats":
        series = np.asarray(series, dtype=float)
        return cls(
            count=1,
            mean=series.copy(),
            m2=np.zeros_like(series),
            minimum=series.copy(),
            maximum=series.copy(),
        )

    def merge(self, other: "RunningStats") -> "RunningStats":
        total = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / total)
        m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / total)
        return RunningStats(
            count=total,
            mean=mean,
            m2=m2,
            minimum=np.minimum(self.minimum, other.minimum),
            maximum=np.maximum(self.maximum, other.maximum),
        )


@dataclass(frozen=True)
class EnsembleStats:
    """Per-step cross-replica aggregates of the diameter series."""

    replicas: int
    mean: np.ndarray
    variance: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    half_width: np.ndarray
    z: float = DEFAULT_Z

    @property
    def horizon(self) -> int:
        return self.mean.size - 1


def _stats_from_running(acc: RunningStats, z: float) -> EnsembleStats:
    variance = acc.m2 / (acc.count - 1)
    return EnsembleStats(
        replicas=acc.count,
        mean=acc.mean,
        variance=variance,
        minimum=acc.minimum,
        maximum=acc.maximum,
        half_width=z * np.sqrt(variance / acc.count),
        z=z,
    )


def ensemble_mean_diameter(
    series: Iterable[np.ndarray],
    *,
    z: float = DEFAULT_Z,
    mode: str = "stacked",
) -> EnsembleStats:
    """Aggregate replica diameter series into per-step ensemble statistics.

    mode "stacked" computes moments over the stacked matrix; "fold"
    merges RunningStats pairwise (tree order). Both agree to floating-
    point reassociation; "stacked" over a fixed replica order is the
    deterministic reference.
    """
    mats = [np.asarray(s, dtype=float) for s in series]
    if len(mats) < 2:
        raise ValueError("ensemble statistics need at least 2 replicas")
    length = mats[0].size
    if any(m.size != length for m in mats):
        raise ValueError("all replica series must share the same horizon")
    if mode == "stacked":
        mat = np.vstack(mats)
        variance = mat.var(axis=0, ddof=1)
        return EnsembleStats(
            replicas=len(mats),
            mean=mat.mean(axis=0),
            variance=variance,
            minimum=mat.min(axis=0),
            maximum=mat.max(axis=0),
            half_width=z * np.sqrt(variance / len(mats)),
            z=z,
        )
    if mode == "fold":
        accs = [RunningStats.from_series(m) for m in mats]
        while len(accs) > 1:
            merged = [
                accs[i].merge(accs[i + 1]) if i + 1 < len(accs) else accs[i]
                for i in range(0, len(accs), 2)
            ]
            accs = merged
        return _stats_from_running(accs[0], z)
    raise ValueError(f"unknown aggregation mode {mode!r}")


@dataclass(frozen=True)
class QuasiSyncVerdict:
    """Outcome of the synchronization-in-mean check over a tail window."""

    passed: bool
    margin: float
    epsilon: float
    tail_fraction: float
    window_start: int
    worst_value: float
    worst_step: int

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "margin": self.margin,
            "epsilon": self.epsilon,
            "tail_fraction": self.tail_fraction,
            "window_start": self.window_start,
            "worst_value": self.worst_value,
            "worst_step": self.worst_step,
        }


def check_quasi_sync_in_mean(
    stats: EnsembleStats, epsilon: float, tail_fraction: float = 0.25
) -> QuasiSyncVerdict:
    """Pass iff mean + half-width stays <= epsilon over the final tail window.

    The tail window covers the last tail_fraction of the horizon; the
    margin is epsilon minus the worst (largest) upper band in the window,
    so negative margins quantify the failure.
    """
    if not (0.0 < tail_fraction < 1.0):
        raise ValueError("tail_fraction must lie in (0, 1)")
    horizon = stats.horizon
    window_start = int(round((1.0 - tail_fraction) * horizon))
    upper = stats.mean + stats.half_width
    window = upper[window_start:]
    worst_offset = int(np.argmax(window))
    worst = float(window[worst_offset])
    return QuasiSyncVerdict(
        passed=worst <= epsilon,
        margin=float(epsilon - worst),
        epsilon=float(epsilon),
        tail_fraction=float(tail_fraction),
        window_start=window_start,
        worst_value=worst,
        worst_step=window_start + worst_offset,
    )
