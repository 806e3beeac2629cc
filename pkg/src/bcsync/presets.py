"""Named model configurations: HK, DW, and the general assembly.

hk: every agent communicates each step and weighs itself like one more
neighbor (synchronous bounded-confidence averaging).

dw: exactly two random agents interact per step with a fixed mixing
weight; everyone else moves only by noise.
"""

from __future__ import annotations

from .core import ModelConfig
from .sampling import CommunicationRule, InertiaPolicy, NoiseModel

__all__ = ["PRESET_NAMES", "hk_preset", "dw_preset", "general_preset", "parse_size_probs"]

PRESET_NAMES = ("hk", "dw", "general")


def parse_size_probs(spec, n: int) -> CommunicationRule:
    """Accept an explicit array of n+1 probabilities, "uniform", or "fixed:k"."""
    if isinstance(spec, str):
        if spec == "uniform":
            return CommunicationRule.uniform(n)
        if spec.startswith("fixed:"):
            return CommunicationRule.fixed(n, int(spec.split(":", 1)[1]))
        raise ValueError(f"unknown size_probs shorthand {spec!r}")
    probs = tuple(float(p) for p in spec)
    if len(probs) != n + 1:
        raise ValueError(f"size_probs must have n+1 = {n + 1} entries, got {len(probs)}")
    return CommunicationRule(size_probs=probs)


def hk_preset(n: int, epsilon: float, delta: float) -> ModelConfig:
    """Synchronous special case: full participation, neighbor-count inertia."""
    return ModelConfig(
        n=n,
        epsilon=epsilon,
        alpha=1.0 / n,
        inertia=InertiaPolicy.hk(),
        noise=NoiseModel.uniform_noise(delta),
        comm=CommunicationRule.fixed(n, n),
    )


def dw_preset(
    n: int,
    epsilon: float,
    beta: float,
    delta: float,
    *,
    allow_identity_mixing: bool = False,
) -> ModelConfig:
    """Pairwise special case: two random agents mix with constant weight beta.

    beta must lie strictly inside (0,1): beta = 1 makes the update the
    identity and no inertia floor can bracket it, so it is accepted only
    behind allow_identity_mixing.
    """
    beta = float(beta)
    if beta == 1.0 and not allow_identity_mixing:
        raise ValueError(
            "beta = 1 is the identity update and lies outside every inertia "
            "interval; pass allow_identity_mixing=True to force it"
        )
    if not (0.0 < beta <= 1.0):
        raise ValueError("mixing weight beta must lie in (0, 1)")
    alpha = min(beta, 1.0 - beta, 1.0 / n) if beta < 1.0 else 1.0 / n
    return ModelConfig(
        n=n,
        epsilon=epsilon,
        alpha=alpha,
        inertia=InertiaPolicy.constant(beta),
        noise=NoiseModel.uniform_noise(delta),
        comm=CommunicationRule.fixed(n, 2),
        beta=beta,
        allow_identity_inertia=beta == 1.0,
    )


def general_preset(
    n: int,
    epsilon: float,
    delta: float,
    size_probs="uniform",
    inertia: InertiaPolicy | str = "hk_rule",
    *,
    alpha: float | None = None,
    noise: NoiseModel | None = None,
) -> ModelConfig:
    """Direct assembly of the general model from validated components."""
    if isinstance(inertia, str):
        if inertia == "hk_rule":
            policy = InertiaPolicy.hk()
        elif inertia == "uniform_interval":
            policy = InertiaPolicy.uniform_interval(alpha if alpha is not None else 1.0 / n)
        elif inertia.startswith("constant:"):
            policy = InertiaPolicy.constant(float(inertia.split(":", 1)[1]))
        else:
            raise ValueError(f"unknown inertia shorthand {inertia!r}")
    else:
        policy = inertia
    return ModelConfig(
        n=n,
        epsilon=epsilon,
        alpha=alpha if alpha is not None else 1.0 / n,
        inertia=policy,
        noise=noise if noise is not None else NoiseModel.uniform_noise(delta),
        comm=parse_size_probs(size_probs, n),
    )
