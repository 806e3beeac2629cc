"""Constructive noise protocols and conditioned samplers.

These replace the ordinary noise draw (or communicating-set draw) with
adversarial but admissible choices: every emitted noise value has
magnitude inside [floor, delta], a positive-probability band of a valid
noise model, and conditioned communicating sets follow the exact
conditional law of the unconditioned sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb

import numpy as np

from .core import pre_noise_targets
from .metrics import extremal_agents
from .sampling import CommunicationRule, NoiseModel, _sample_subset

__all__ = [
    "ProtocolParams",
    "divergence_noise",
    "contraction_noise",
    "sample_comm_set_with_extremes",
    "conditional_size_probs",
    "large_noise_model",
]


@dataclass(frozen=True)
class ProtocolParams:
    """Admissible band of a noise protocol.

    floor is the smallest magnitude the protocol may emit, delta the
    amplitude bound, band_prob the per-agent probability mass of one
    band under the underlying noise model. Protocols emit +-emit, the
    extreme admissible magnitude (defaults to floor).
    """

    floor: float
    delta: float
    band_prob: float | None = None
    emit: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.floor <= self.delta):
            raise ValueError("protocol floor must satisfy 0 < floor <= delta")
        if self.band_prob is not None and not (0.0 < self.band_prob < 1.0):
            raise ValueError("band probability must lie in (0, 1)")
        if self.emit is None:
            object.__setattr__(self, "emit", self.floor)
        if not (self.floor <= self.emit <= self.delta):
            raise ValueError("emitted magnitude must lie in [floor, delta]")

    @classmethod
    def from_noise(cls, model: NoiseModel, *, emit: float | None = None) -> "ProtocolParams":
        floor, band = model.protocol_band()
        return cls(floor=floor, delta=model.delta, band_prob=band, emit=emit)

    @property
    def escape_steps(self) -> int:
        """Steps of guaranteed outward drift needed to span [0,1]."""
        return math.ceil(1.0 / self.floor)


def _midpoint(x: np.ndarray) -> float:
    lo = float(x.min())
    return lo + (float(x.max()) - lo) / 2.0


def divergence_noise(state, params: ProtocolParams) -> np.ndarray:
    """Noise pushing every agent away from the midpoint of the current range.

    Agents at or below the midpoint get -emit, agents strictly above get
    +emit, so under repeated application the extremes drift apart by at
    least floor per step until the clamp pins them at 0 and 1.
    """
    x = np.asarray(getattr(state, "values", state), dtype=float)
    return np.where(x <= _midpoint(x), -params.emit, params.emit)


def contraction_noise(
    state,
    comm_set,
    inertia: np.ndarray,
    epsilon: float,
    params: ProtocolParams,
) -> np.ndarray:
    """Noise pushing every pre-averaging target toward the range midpoint.

    The sign is chosen against the target each agent would reach before
    noise: targets at or below the midpoint of the current opinion range
    are pushed up, targets above are pushed down. With delta at most half
    the goal radius this drives the diameter below the goal in finite time.
    """
    x = np.asarray(getattr(state, "values", state), dtype=float)
    comm = np.asarray(comm_set, dtype=np.intp)
    targets = pre_noise_targets(x, comm, np.asarray(inertia, dtype=float), epsilon)
    return np.where(targets <= _midpoint(x), params.emit, -params.emit)


def conditional_size_probs(rule: CommunicationRule, n: int, fixed: int) -> np.ndarray:
    """Size law of the communicating set conditioned on containing `fixed` agents."""
    weights = np.zeros(n + 1)
    for k in range(fixed, n + 1):
        weights[k] = rule.size_probs[k] * comb(n - fixed, k - fixed) / comb(n, k)
    total = weights.sum()
    if total <= 0.0:
        raise ValueError("conditioning event has probability zero under this rule")
    return weights / total


def sample_comm_set_with_extremes(
    rng: np.random.Generator,
    rule: CommunicationRule,
    state,
    n: int,
) -> np.ndarray:
    """Draw a communicating set conditioned on containing both extremal agents.

    Exact conditional sampling: the size is drawn from the renormalized
    conditional size law, then the remaining members are a uniform subset
    of the other agents, which reproduces the conditional distribution
    over supersets without rejection.
    """
    rule.validate_for(n)
    m, big = extremal_agents(state)
    forced = sorted({m, big})
    weights = conditional_size_probs(rule, n, len(forced))
    k = int(np.searchsorted(np.cumsum(weights), rng.random(), side="right"))
    rest = np.asarray([i for i in range(n) if i not in forced], dtype=np.intp)
    picked = _sample_subset(rng, rest.size, k - len(forced))
    return np.sort(np.concatenate([np.asarray(forced, dtype=np.intp), rest[picked]]))


def large_noise_model(epsilon: float, p: float) -> NoiseModel:
    """Two-point noise strong enough to keep the mean diameter above epsilon.

    Places mass 1/2 on each of +-epsilon/(2 p^2) so that both tails carry
    at least probability p. Zero-mean feasibility forces p <= 1/2, and the
    construction requires epsilon <= 2 p^2 so the atoms stay meaningful.
    """
    if not (0.0 < p <= 1.0):
        raise ValueError("tail probability p must lie in (0, 1]")
    if p > 0.5:
        raise ValueError(
            "both tails cannot each carry probability > 1/2 under a zero-mean law"
        )
    if epsilon > 2.0 * p * p:
        raise ValueError(f"epsilon must be <= 2 p^2 = {2.0 * p * p}")
    magnitude = epsilon / (2.0 * p * p)
    return NoiseModel.two_point(magnitude)
