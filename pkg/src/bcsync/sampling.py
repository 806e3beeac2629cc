"""Random ingredients of one step: communicating set, noise, inertia.

Each trajectory owns a family of independent, reproducible RNG streams
keyed by (seed, replica, purpose) so that communicating-set draws, noise
draws, and inertia draws are mutually independent and replicas never
share a stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "PURPOSES",
    "RngStream",
    "stream",
    "trajectory_streams",
    "CommunicationRule",
    "NoiseModel",
    "InertiaPolicy",
    "sample_comm_set",
    "sample_noise",
    "inertia_coefficients",
]

# Fixed purpose tags; the index is part of the stream key.
PURPOSES = ("comm", "noise", "inertia", "init")
_PURPOSE_INDEX = {name: i for i, name in enumerate(PURPOSES)}

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class RngStream:
    """Key of one reproducible random stream.

    Distinct (seed, replica, purpose) triples yield statistically
    independent PCG64 generators; identical triples yield identical
    draw sequences.
    """

    seed: int
    replica: int = 0
    purpose: str = "noise"

    def generator(self) -> np.random.Generator:
        if self.purpose not in _PURPOSE_INDEX:
            raise ValueError(f"unknown stream purpose {self.purpose!r}")
        key = (self.replica, _PURPOSE_INDEX[self.purpose])
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=key)
        return np.random.Generator(np.random.PCG64(seq))


def stream(seed: int, replica: int, purpose: str) -> np.random.Generator:
    """Generator for one (seed, replica, purpose) stream."""
    return RngStream(seed, replica, purpose).generator()


def trajectory_streams(seed: int, replica: int = 0) -> dict[str, np.random.Generator]:
    """All per-purpose generators for one trajectory."""
    return {p: stream(seed, replica, p) for p in PURPOSES}


@dataclass(frozen=True)
class CommunicationRule:
    """Size distribution p_0..p_n of the communicating set.

    Given the sampled size k, the subset is uniform over all k-subsets.
    Requires sum(p_k) = 1 and p_0 + p_1 < 1 so that at least two agents
    communicate with positive probability.
    """

    size_probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.size_probs)
        object.__setattr__(self, "size_probs", probs)
        if len(probs) < 3:
            raise ValueError("size_probs must cover sizes 0..n for n >= 2")
        if any(p < 0.0 or p > 1.0 for p in probs):
            raise ValueError("every size probability must lie in [0, 1]")
        if abs(sum(probs) - 1.0) > _SUM_TOL:
            raise ValueError(f"size probabilities must sum to 1, got {sum(probs)!r}")
        if probs[0] + probs[1] >= 1.0 - _SUM_TOL:
            raise ValueError(
                "p_0 + p_1 must be < 1: communication among at least two agents "
                "needs positive probability"
            )

    @property
    def n(self) -> int:
        return len(self.size_probs) - 1

    def validate_for(self, n: int) -> None:
        if self.n != n:
            raise ValueError(f"size_probs covers 0..{self.n} but model has n={n}")

    @classmethod
    def uniform(cls, n: int) -> "CommunicationRule":
        """Every size 0..n equally likely."""
        return cls(size_probs=(1.0 / (n + 1),) * (n + 1))

    @classmethod
    def fixed(cls, n: int, k: int) -> "CommunicationRule":
        """Always exactly k communicating agents."""
        if not (0 <= k <= n):
            raise ValueError(f"fixed size {k} outside 0..{n}")
        probs = [0.0] * (n + 1)
        probs[k] = 1.0
        return cls(size_probs=tuple(probs))

    def cumulative(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.size_probs, dtype=float))

    def canonical_dict(self) -> dict:
        return {"size_probs": [float(p) for p in self.size_probs]}


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean, amplitude-bounded, i.i.d. per-agent noise.

    kinds:
      uniform          uniform on [-delta, delta]
      two_point        atoms -delta and +delta with weight 1/2 each
      custom_discrete  explicit atoms/weights, zero mean, |atom| <= delta

    delta == 0 is the degenerate noise-free configuration (all draws
    zero); it is accepted so that deterministic reference runs stay
    expressible, but the positive-variance requirement then lapses.
    """

    kind: str = "uniform"
    delta: float = 0.0
    atoms: tuple[float, ...] | None = None
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.atoms is not None:
            object.__setattr__(self, "atoms", tuple(float(a) for a in self.atoms))
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        self.validate()

    def validate(self) -> None:
        if self.kind not in ("uniform", "two_point", "custom_discrete"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.delta < 0.0:
            raise ValueError("noise amplitude delta must be >= 0")
        if self.degenerate:
            return
        if self.kind == "custom_discrete":
            if not self.atoms or not self.weights or len(self.atoms) != len(self.weights):
                raise ValueError("custom_discrete needs matching atoms and weights")
            atoms = np.asarray(self.atoms)
            weights = np.asarray(self.weights)
            if weights.min() < 0.0 or abs(weights.sum() - 1.0) > _SUM_TOL:
                raise ValueError("weights must be non-negative and sum to 1")
            if np.abs(atoms).max() > self.delta + 1e-15:
                raise ValueError("every atom magnitude must be <= delta")
            if abs(float(weights @ atoms)) > _SUM_TOL:
                raise ValueError("noise must have zero mean")
            if float(weights @ atoms**2) <= 0.0:
                raise ValueError("noise must have positive variance")

    @property
    def degenerate(self) -> bool:
        return self.delta == 0.0

    @classmethod
    def uniform_noise(cls, delta: float) -> "NoiseModel":
        return cls(kind="uniform", delta=float(delta))

    @classmethod
    def two_point(cls, magnitude: float) -> "NoiseModel":
        m = float(magnitude)
        return cls(kind="two_point", delta=m, atoms=(-m, m), weights=(0.5, 0.5))

    @classmethod
    def disabled(cls) -> "NoiseModel":
        """Degenerate noise-free model (delta = 0)."""
        return cls(kind="uniform", delta=0.0)

    def variance(self) -> float:
        if self.degenerate:
            return 0.0
        if self.kind == "uniform":
            return self.delta**2 / 3.0
        atoms = np.asarray(self.atoms if self.kind == "custom_discrete" else (-self.delta, self.delta))
        weights = np.asarray(self.weights if self.kind == "custom_discrete" else (0.5, 0.5))
        return float(weights @ atoms**2)

    def band_probability(self, low: float) -> float:
        """P{xi in [low, delta]} (by symmetry also the mass of [-delta, -low])."""
        if self.degenerate:
            return 0.0
        if self.kind == "uniform":
            return max(0.0, (self.delta - low) / (2.0 * self.delta))
        atoms = self.atoms if self.kind == "custom_discrete" else (-self.delta, self.delta)
        weights = self.weights if self.kind == "custom_discrete" else (0.5, 0.5)
        return float(sum(w for a, w in zip(atoms, weights) if low <= a <= self.delta))

    def protocol_band(self) -> tuple[float, float]:
        """Default (low, band_probability) pair for noise protocols.

        Discrete kinds use the smallest positive atom magnitude; the
        uniform kind uses delta/2 (band mass 1/4 per side).
        """
        if self.degenerate:
            raise ValueError("degenerate noise model has no protocol band")
        if self.kind == "uniform":
            low = self.delta / 2.0
        else:
            atoms = self.atoms if self.kind == "custom_discrete" else (-self.delta, self.delta)
            mags = sorted(abs(a) for a in atoms if a != 0.0)
            if not mags:
                raise ValueError("noise model has no nonzero atoms")
            low = mags[0]
        p = min(self.band_probability(low), self._neg_band(low))
        if p <= 0.0:
            raise ValueError("noise model puts no mass on the protocol band")
        return low, p

    def _neg_band(self, low: float) -> float:
        if self.kind == "uniform":
            return max(0.0, (self.delta - low) / (2.0 * self.delta))
        atoms = self.atoms if self.kind == "custom_discrete" else (-self.delta, self.delta)
        weights = self.weights if self.kind == "custom_discrete" else (0.5, 0.5)
        return float(sum(w for a, w in zip(atoms, weights) if -self.delta <= a <= -low))

    def canonical_dict(self) -> dict:
        return {
            "kind": self.kind,
            "delta": float(self.delta),
            "atoms": None if self.atoms is None else [float(a) for a in self.atoms],
            "weights": None if self.weights is None else [float(w) for w in self.weights],
        }


@dataclass(frozen=True)
class InertiaPolicy:
    """How per-agent inertia coefficients are produced each step.

    kinds:
      hk_rule           1 / (|N_i| + 1) for communicating agents
      constant          one fixed value for every agent
      uniform_interval  i.i.d. uniform draws on [low, high]
    """

    kind: str = "hk_rule"
    value: float | None = None
    low: float | None = None
    high: float | None = None

    def validate(self) -> None:
        if self.kind not in ("hk_rule", "constant", "uniform_interval"):
            raise ValueError(f"unknown inertia kind {self.kind!r}")
        if self.kind == "constant":
            if self.value is None or not (0.0 < self.value <= 1.0):
                raise ValueError("constant inertia needs a value in (0, 1]")
        if self.kind == "uniform_interval":
            if self.low is None or self.high is None or not (0.0 < self.low <= self.high < 1.0):
                raise ValueError("uniform_interval inertia needs 0 < low <= high < 1")

    @classmethod
    def hk(cls) -> "InertiaPolicy":
        return cls(kind="hk_rule")

    @classmethod
    def constant(cls, value: float) -> "InertiaPolicy":
        return cls(kind="constant", value=float(value))

    @classmethod
    def uniform_interval(cls, alpha: float) -> "InertiaPolicy":
        return cls(kind="uniform_interval", low=float(alpha), high=1.0 - float(alpha))

    def canonical_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value, "low": self.low, "high": self.high}


def _sample_size(rng: np.random.Generator, cumulative: np.ndarray) -> int:
    """Inverse-CDF draw of the communicating-set size."""
    return int(np.searchsorted(cumulative, rng.random(), side="right"))


def _sample_subset(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """Uniform k-subset of 0..n-1 by partial Fisher-Yates selection."""
    if k <= 0:
        return np.empty(0, dtype=np.intp)
    if k > n:
        raise ValueError(f"cannot choose {k} agents out of {n}")
    buf = list(range(n))
    draws = rng.integers(np.arange(k), n)
    for i in range(k):
        j = int(draws[i])
        buf[i], buf[j] = buf[j], buf[i]
    return np.sort(np.asarray(buf[:k], dtype=np.intp))


def _sample_comm_set_from_probs(
    rng: np.random.Generator, size_probs: Iterable[float], n: int
) -> np.ndarray:
    """Sampler mechanics without rule validation (unit-test hook)."""
    cumulative = np.cumsum(np.asarray(list(size_probs), dtype=float))
    return _sample_subset(rng, n, _sample_size(rng, cumulative))


def sample_comm_set(
    rng: np.random.Generator, rule: CommunicationRule, n: int
) -> np.ndarray:
    """Draw one communicating set: size from the rule, subset uniform given size."""
    rule.validate_for(n)
    return _sample_subset(rng, n, _sample_size(rng, rule.cumulative()))


def sample_noise(rng: np.random.Generator, model: NoiseModel, n: int) -> np.ndarray:
    """n i.i.d. noise draws with |xi| <= delta."""
    if model.degenerate:
        return np.zeros(n)
    if model.kind == "uniform":
        return rng.uniform(-model.delta, model.delta, n)
    atoms = np.asarray(model.atoms if model.kind == "custom_discrete" else (-model.delta, model.delta))
    weights = np.asarray(model.weights if model.kind == "custom_discrete" else (0.5, 0.5))
    cumulative = np.cumsum(weights)
    return atoms[np.searchsorted(cumulative, rng.random(n), side="right").clip(0, atoms.size - 1)]


def inertia_coefficients(
    rng: np.random.Generator,
    policy: InertiaPolicy,
    state,
    comm_set: np.ndarray,
    epsilon: float,
) -> np.ndarray:
    """Per-agent inertia coefficients for one step.

    hk_rule yields 1/(|N_i|+1) from the communicating neighbor counts
    (placeholder 1.0 for agents outside the communicating set, whose
    coefficient is never read); constant and uniform_interval do not
    depend on the state. uniform_interval consumes n draws per call.
    """
    x = np.asarray(getattr(state, "values", state), dtype=float)
    n = x.size
    if policy.kind == "constant":
        return np.full(n, policy.value, dtype=float)
    if policy.kind == "uniform_interval":
        return rng.uniform(policy.low, policy.high, n)
    coeffs = np.ones(n)
    comm = np.asarray(comm_set, dtype=np.intp)
    if comm.size >= 2:
        xu = x[comm]
        adj = np.abs(xu[:, None] - xu[None, :]) <= epsilon
        np.fill_diagonal(adj, False)
        coeffs[comm] = 1.0 / (adj.sum(axis=1) + 1.0)
    return coeffs
