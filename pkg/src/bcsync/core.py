"""Single-step dynamics of the bounded-confidence model.

Opinions live on [0,1]. At each step a random subset of agents (the
communicating set) averages with the communicating agents within its
confidence threshold, weighted by a per-agent inertia coefficient; every
agent then receives bounded additive noise and is clamped back to [0,1].

All functions here are pure and deterministic given their inputs: the
random ingredients (communicating set, inertia coefficients, noise) are
sampled elsewhere and passed in, so adversarial noise protocols can be
injected deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .sampling import CommunicationRule, InertiaPolicy, NoiseModel

__all__ = [
    "OpinionState",
    "ModelConfig",
    "StepInputs",
    "clamp_unit",
    "neighbor_set",
    "pre_noise_target",
    "pre_noise_targets",
    "step",
    "step_values",
]


def clamp_unit(y: float) -> float:
    """Project a finite real onto [0,1]."""
    y = float(y)
    if not np.isfinite(y):
        raise ValueError(f"clamp_unit requires a finite value, got {y!r}")
    if y < 0.0:
        return 0.0
    if y > 1.0:
        return 1.0
    return y


@dataclass(frozen=True)
class OpinionState:
    """Opinion vector of all agents at one time step.

    values is stored read-only; every entry must lie in [0,1].
    """

    values: np.ndarray
    time: int = 0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("opinion vector must be 1-d with at least 2 agents")
        if not np.all(np.isfinite(values)):
            raise ValueError("opinion values must be finite")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("opinion values must lie in [0,1]")
        if self.time < 0:
            raise ValueError("time index must be non-negative")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ModelConfig:
    """Full parameterization of the dynamics.

    alpha is the inertia floor: every inertia coefficient must lie in
    [alpha, 1-alpha], with 0 < alpha <= 1/n.
    """

    n: int
    epsilon: float
    alpha: float
    inertia: InertiaPolicy
    noise: NoiseModel
    comm: CommunicationRule
    beta: float | None = None
    # Permits a constant inertia of exactly 1.0 (identity mixing), which is
    # otherwise outside [alpha, 1-alpha] for every admissible alpha.
    allow_identity_inertia: bool = False

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("agent count n must be >= 2")
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError("confidence threshold epsilon must lie in (0, 1]")
        if not (0.0 < self.alpha <= 1.0 / self.n):
            raise ValueError("inertia floor alpha must lie in (0, 1/n]")
        self.comm.validate_for(self.n)
        self.noise.validate()
        self.inertia.validate()
        if self.inertia.kind == "constant":
            v = self.inertia.value
            identity_ok = self.allow_identity_inertia and v == 1.0
            if not identity_ok and not (self.alpha <= v <= 1.0 - self.alpha):
                raise ValueError(
                    f"constant inertia {v} outside [alpha, 1-alpha] = "
                    f"[{self.alpha}, {1.0 - self.alpha}]"
                )
        if self.beta is not None and not (0.0 < self.beta <= 1.0):
            raise ValueError("mixing weight beta must lie in (0, 1]")

    def canonical_dict(self) -> dict:
        """Stable, JSON-serializable description used for fingerprinting."""
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "inertia": self.inertia.canonical_dict(),
            "noise": self.noise.canonical_dict(),
            "size_probs": [float(p) for p in self.comm.size_probs],
            "beta": self.beta,
            "allow_identity_inertia": self.allow_identity_inertia,
        }


@dataclass(frozen=True)
class StepInputs:
    """Pre-sampled random ingredients for one step.

    comm_set holds the indices of communicating agents. Inertia
    coefficients are read only for communicating agents with a non-empty
    neighbor set, so entries for other agents may hold any placeholder.
    """

    comm_set: np.ndarray
    inertia: np.ndarray
    noise: np.ndarray

    def __post_init__(self) -> None:
        comm = np.unique(np.asarray(self.comm_set, dtype=np.intp))
        object.__setattr__(self, "comm_set", comm)
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        object.__setattr__(self, "noise", np.asarray(self.noise, dtype=float))


def _as_comm_array(comm_set: Iterable[int] | np.ndarray) -> np.ndarray:
    comm = np.asarray(sorted(set(int(i) for i in comm_set)), dtype=np.intp)
    return comm


def neighbor_set(
    i: int, state: OpinionState, comm_set: Iterable[int], epsilon: float
) -> set[int]:
    """Communicating agents other than i whose opinion is within epsilon of i's.

    Only defined for communicating agents: raises if i is not in comm_set.
    """
    comm = set(int(j) for j in comm_set)
    if i not in comm:
        raise ValueError(f"agent {i} is not in the communicating set")
    x = state.values
    xi = x[i]
    return {j for j in comm if j != i and abs(x[j] - xi) <= epsilon}


def pre_noise_target(
    i: int,
    state: OpinionState,
    comm_set: Iterable[int],
    inertia_i: float,
    epsilon: float,
) -> float:
    """Opinion of agent i after averaging but before noise and clamping.

    Communicating agents with at least one neighbor move to the convex
    combination inertia_i * x_i + (1 - inertia_i) * mean(neighbors); all
    other agents keep their current opinion.
    """
    comm = set(int(j) for j in comm_set)
    x = state.values
    if i not in comm:
        return float(x[i])
    nbrs = neighbor_set(i, state, comm, epsilon)
    if not nbrs:
        return float(x[i])
    mean = sum(float(x[j]) for j in sorted(nbrs)) / len(nbrs)
    return float(inertia_i * x[i] + (1.0 - inertia_i) * mean)


def pre_noise_targets(
    x: np.ndarray, comm: np.ndarray, inertia: np.ndarray, epsilon: float
) -> np.ndarray:
    """Vector of pre-noise targets for all agents (vectorized kernel).

    comm must hold distinct agent indices. Non-communicating and
    neighborless agents keep their current value.
    """
    targets = x.copy()
    k = comm.size
    if k >= 2:
        xu = x[comm]
        adj = np.abs(xu[:, None] - xu[None, :]) <= epsilon
        np.fill_diagonal(adj, False)
        counts = adj.sum(axis=1)
        has = counts > 0
        if has.any():
            nbr_mean = (adj[has] @ xu) / counts[has]
            a = inertia[comm[has]]
            targets[comm[has]] = a * xu[has] + (1.0 - a) * nbr_mean
    return targets


def step_values(
    x: np.ndarray,
    comm: np.ndarray,
    inertia: np.ndarray,
    noise: np.ndarray,
    epsilon: float,
) -> np.ndarray:
    """One unvalidated update: averaging, additive noise, clamp to [0,1]."""
    return np.clip(pre_noise_targets(x, comm, inertia, epsilon) + noise, 0.0, 1.0)


def step(state: OpinionState, inputs: StepInputs, config: ModelConfig) -> OpinionState:
    """Advance the state by one step using pre-sampled inputs.

    Validates the inputs against the configuration, then applies the
    averaging update, the noise, and the clamp. Pure function: identical
    inputs produce identical outputs.
    """
    x = state.values
    n = x.size
    if n != config.n:
        raise ValueError(f"state has {n} agents but config expects {config.n}")
    if inputs.inertia.shape != (n,) or inputs.noise.shape != (n,):
        raise ValueError("inertia and noise must be length-n vectors")
    comm = inputs.comm_set
    if comm.size and (comm[0] < 0 or comm[-1] >= n):
        raise ValueError("communicating set contains out-of-range agent indices")
    delta = config.noise.delta
    if np.abs(inputs.noise).max(initial=0.0) > delta:
        raise ValueError(f"noise magnitude exceeds the amplitude bound {delta}")
    if comm.size >= 2:
        lo, hi = config.alpha, 1.0 - config.alpha
        xu = x[comm]
        adj = np.abs(xu[:, None] - xu[None, :]) <= config.epsilon
        np.fill_diagonal(adj, False)
        used = comm[adj.any(axis=1)]
        a_used = inputs.inertia[used]
        identity_ok = config.allow_identity_inertia
        if a_used.size and not identity_ok:
            if a_used.min() < lo - 1e-15 or a_used.max() > hi + 1e-15:
                raise ValueError(
                    f"inertia coefficients outside [alpha, 1-alpha] = [{lo}, {hi}]"
                )
    new_values = step_values(x, comm, inputs.inertia, inputs.noise, config.epsilon)
    return OpinionState(values=new_values, time=state.time + 1)
