"""Verification suites for the model's synchronization claims.

Each function runs one empirical check against the matching analytical
quantity and returns a JSON-serializable verdict with the theoretical
bound, the empirical measurement, the margin, and the seeds used.
Statistical checks pass at a 3-sigma allowance; pathwise checks demand
every run to satisfy the inequality (up to 1e-12 float headroom).
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .core import ModelConfig, step_values
from .harness import run_ensemble
from .metrics import (
    check_quasi_sync_in_mean,
    extremes_communicating,
    prob_extremes_communicating,
    stopping_time,
    theory_constants,
)
from .protocols import (
    ProtocolParams,
    contraction_noise,
    divergence_noise,
    large_noise_model,
    sample_comm_set_with_extremes,
)
from .sampling import inertia_coefficients, sample_comm_set, sample_noise, trajectory_streams

__all__ = [
    "verify_pair_activation_probability",
    "verify_noise_ceiling",
    "verify_sync_in_mean",
    "verify_escape",
    "verify_forced_contraction",
    "verify_protocol_hitting",
    "verify_large_noise",
    "VERIFY_SUBCOMMANDS",
]

# Pathwise inequalities are checked with this much floating-point headroom.
_FLOAT_SLACK = 1e-12


def verify_pair_activation_probability(
    config: ModelConfig, *, steps: int = 100_000, seed: int = 0
) -> dict:
    """Compare the exact probability that both extremes communicate with a
    Monte Carlo frequency over independent communicating-set draws."""
    n = config.n
    exact = prob_extremes_communicating(config.comm, n)
    streams = trajectory_streams(seed, 0)
    state = np.linspace(0.0, 1.0, n)
    hits = 0
    for _ in range(steps):
        comm = sample_comm_set(streams["comm"], config.comm, n)
        hits += extremes_communicating(state, comm)
    freq = hits / steps
    se = math.sqrt(exact * (1.0 - exact) / steps)
    passed = abs(freq - exact) <= 3.0 * se if se > 0.0 else freq == exact
    return {
        "check": "prob-A",
        "passed": bool(passed),
        "seed": seed,
        "theory": {"exact": exact},
        "empirical": {"frequency": freq, "steps": steps, "std_error": se},
        "margin": 3.0 * se - abs(freq - exact),
    }


def verify_noise_ceiling(
    config: ModelConfig, *, mu: float = 1.0, lam: float = 1.0, window_cap: int = 10**6
) -> dict:
    """Evaluate the analytical constants; fails loudly past the window cap."""
    constants = theory_constants(mu, lam, config, window_cap=window_cap)
    return {
        "check": "delta-bar",
        "passed": True,
        "theory": constants.as_dict(),
        "empirical": {"config_delta": config.noise.delta,
                      "delta_below_ceiling": config.noise.delta <= constants.noise_ceiling},
        "margin": constants.noise_ceiling - config.noise.delta,
    }


def verify_sync_in_mean(
    config: ModelConfig,
    *,
    replicas: int = 100,
    horizon: int = 10_000,
    tail_fraction: float = 0.25,
    seed: int = 0,
    workers: int = 1,
    strict: bool = False,
    initial=None,
) -> dict:
    """Ensemble mean-diameter verdict over the tail window.

    strict mode refuses noise amplitudes above the analytical ceiling
    instead of running an experiment outside the guaranteed regime.
    """
    if strict:
        constants = theory_constants(1.0, 1.0, config)
        if config.noise.delta > constants.noise_ceiling:
            raise ValueError(
                f"strict mode: noise delta {config.noise.delta} exceeds the "
                f"analytical ceiling {constants.noise_ceiling}"
            )
    seeds = [seed + r for r in range(replicas)]
    stats, records = run_ensemble(
        config, seeds, horizon, workers=workers, initial=initial
    )
    verdict = check_quasi_sync_in_mean(stats, config.epsilon, tail_fraction)
    window = verdict.window_start
    exceed = [float(r.diameters[window:].max()) > config.epsilon for r in records]
    return {
        "check": "im",
        "passed": bool(verdict.passed),
        "seeds": seeds,
        "theory": {"epsilon": config.epsilon},
        "empirical": {
            **verdict.as_dict(),
            "replica_window_exceed_fraction": sum(exceed) / len(exceed),
        },
        "margin": verdict.margin,
    }


def verify_escape(
    config: ModelConfig,
    *,
    windows: int = 10_000,
    seed: int = 0,
    emit: float | None = None,
) -> dict:
    """Spread probability under the outward protocol whenever an extreme is silent.

    Runs independent windows of escape_steps steps from fresh random
    starts; whenever both extremes happen to communicate the ordinary
    model noise is used instead. The empirical probability of ending at
    full spread must be at least the analytical floor
    (2(1-p_n)/n)^escape_steps * band_prob^(n*escape_steps).
    """
    n = config.n
    params = ProtocolParams.from_noise(config.noise, emit=emit)
    t_len = params.escape_steps
    p_n = config.comm.size_probs[n]
    if p_n >= 1.0:
        raise ValueError("escape needs p_n < 1: with full participation the "
                         "extremes always communicate")
    silent_floor = 2.0 * (1.0 - p_n) / n
    bound = silent_floor**t_len * params.band_prob ** (n * t_len)
    streams = trajectory_streams(seed, 0)
    policy = config.inertia
    end_hits = 0
    sup_hits = 0
    for _ in range(windows):
        x = streams["init"].random(n)
        reached = False
        for _ in range(t_len):
            comm = sample_comm_set(streams["comm"], config.comm, n)
            inertia = inertia_coefficients(streams["inertia"], policy, x, comm, config.epsilon)
            if extremes_communicating(x, comm):
                noise = sample_noise(streams["noise"], config.noise, n)
            else:
                noise = divergence_noise(x, params)
            x = step_values(x, comm, inertia, noise, config.epsilon)
            if x.max() - x.min() == 1.0:
                reached = True
        end_hits += bool(x.max() - x.min() == 1.0)
        sup_hits += bool(reached)
    freq = end_hits / windows
    se = math.sqrt(max(freq * (1.0 - freq), bound * (1.0 - bound)) / windows)
    return {
        "check": "as-failure",
        "passed": bool(freq >= bound - 3.0 * se),
        "seed": seed,
        "theory": {
            "bound": bound,
            "escape_steps": t_len,
            "silent_extreme_prob_floor": silent_floor,
            "band_prob": params.band_prob,
            "per_step_protocol_prob": params.band_prob**n,
        },
        "empirical": {
            "end_spread_frequency": freq,
            "sup_spread_frequency": sup_hits / windows,
            "windows": windows,
            "std_error": se,
        },
        "margin": freq - (bound - 3.0 * se),
    }


def verify_forced_contraction(
    config: ModelConfig,
    *,
    lam: float = 1.0,
    runs: int = 1000,
    seed: int = 0,
) -> dict:
    """Pathwise contraction with both extremes forced to communicate.

    Starts each run at the worst admissible diameter lam*epsilon/2, keeps
    the extremes in every communicating set for n(n-1)/2 steps, injects
    worst-case outward noise at the exact amplitude ceiling
    alpha*lam*epsilon/(2 n (n-1)^2), and requires every run to satisfy
    both the per-step growth envelope and the final contraction bound.
    """
    n = config.n
    epsilon = config.epsilon
    alpha = config.alpha
    delta = alpha * lam * epsilon / (2.0 * n * (n - 1) ** 2)
    window = n * (n - 1) // 2
    final_bound = lam * epsilon / 2.0 - alpha * lam * epsilon / (2.0 * (n - 1))
    params = ProtocolParams(floor=delta, delta=delta)
    inertia = np.full(n, alpha)
    streams = trajectory_streams(seed, 0)
    contraction_ok = 0
    envelope_ok = 0
    worst_final = 0.0
    for _ in range(runs):
        lo = streams["init"].random() * (1.0 - lam * epsilon / 2.0)
        x = lo + streams["init"].random(n) * (lam * epsilon / 2.0)
        x[0] = lo
        x[1] = lo + lam * epsilon / 2.0
        d0 = x.max() - x.min()
        env = True
        for t in range(window):
            comm = sample_comm_set_with_extremes(streams["comm"], config.comm, x, n)
            noise = divergence_noise(x, params)
            x = step_values(x, comm, inertia, noise, epsilon)
            dv = x.max() - x.min()
            if dv > min(d0 + 2.0 * (t + 1) * delta, lam * epsilon) + _FLOAT_SLACK:
                env = False
        final = float(x.max() - x.min())
        worst_final = max(worst_final, final)
        contraction_ok += bool(final <= final_bound + _FLOAT_SLACK)
        envelope_ok += bool(env)
    return {
        "check": "lemma3",
        "passed": bool(contraction_ok == runs and envelope_ok == runs),
        "seed": seed,
        "theory": {
            "delta": delta,
            "window": window,
            "final_bound": final_bound,
            "initial_diameter": lam * epsilon / 2.0,
        },
        "empirical": {
            "runs": runs,
            "contraction_ok": contraction_ok,
            "envelope_ok": envelope_ok,
            "worst_final_diameter": worst_final,
        },
        "margin": final_bound - worst_final,
    }


def verify_protocol_hitting(
    config: ModelConfig,
    *,
    lam: float = 1.0,
    runs: int = 1000,
    horizon: int = 10_000,
    seed: int = 0,
    emit: float | None = None,
) -> dict:
    """Finite hitting time of the inward protocol from the worst-case start.

    Every agent starts at 0 or 1 (alternating); the protocol pushes each
    pre-averaging target toward the midpoint of the current range. The
    stopping time at lam*epsilon must be finite in every run.
    """
    n = config.n
    epsilon = config.epsilon
    goal = lam * epsilon
    params = ProtocolParams.from_noise(config.noise, emit=emit)
    if params.delta > goal / 2.0 + _FLOAT_SLACK:
        raise ValueError(
            f"hitting protocol needs delta <= lam*epsilon/2 = {goal / 2.0}, "
            f"got {params.delta}"
        )
    streams = trajectory_streams(seed, 0)
    start = np.asarray([float(i % 2) for i in range(n)])
    times = []
    for _ in range(runs):
        x = start.copy()
        diameters = [x.max() - x.min()]
        for _ in range(horizon):
            comm = sample_comm_set(streams["comm"], config.comm, n)
            inertia = inertia_coefficients(
                streams["inertia"], config.inertia, x, comm, epsilon
            )
            noise = contraction_noise(x, comm, inertia, epsilon, params)
            x = step_values(x, comm, inertia, noise, epsilon)
            diameters.append(x.max() - x.min())
            if diameters[-1] <= goal:
                break
        times.append(stopping_time(np.asarray(diameters), goal))
    finite = [t for t in times if t is not None]
    passed = len(finite) == runs
    return {
        "check": "lemma2",
        "passed": bool(passed),
        "seed": seed,
        "theory": {"goal": goal, "delta": params.delta, "horizon": horizon},
        "empirical": {
            "runs": runs,
            "finite": len(finite),
            "min_time": min(finite) if finite else None,
            "median_time": float(np.median(finite)) if finite else None,
            "max_time": max(finite) if finite else None,
        },
        "margin": (horizon - max(finite)) if passed else -1,
    }


def verify_large_noise(
    config: ModelConfig,
    *,
    p: float = 0.5,
    replicas: int = 50,
    horizon: int = 5000,
    tail_fraction: float = 0.25,
    seed: int = 0,
    workers: int = 1,
) -> dict:
    """Noise atoms at epsilon/(2 p^2) keep the tail mean diameter above epsilon."""
    model = large_noise_model(config.epsilon, p)
    noisy = replace(config, noise=model)
    seeds = [seed + r for r in range(replicas)]
    stats, records = run_ensemble(noisy, seeds, horizon, workers=workers)
    window = int(round((1.0 - tail_fraction) * horizon))
    tail_means = np.asarray([r.diameters[window:].mean() for r in records])
    mean = float(tail_means.mean())
    se = float(tail_means.std(ddof=1) / math.sqrt(replicas))
    return {
        "check": "large-noise",
        "passed": bool(mean - 3.0 * se > config.epsilon),
        "seeds": seeds,
        "theory": {"epsilon": config.epsilon, "atom": model.delta, "p": p},
        "empirical": {
            "tail_mean": mean,
            "std_error": se,
            "window_start": window,
            "replicas": replicas,
        },
        "margin": mean - 3.0 * se - config.epsilon,
    }


VERIFY_SUBCOMMANDS = {
    "im": verify_sync_in_mean,
    "as-failure": verify_escape,
    "lemma3": verify_forced_contraction,
    "lemma2": verify_protocol_hitting,
    "large-noise": verify_large_noise,
    "prob-A": verify_pair_activation_probability,
    "delta-bar": verify_noise_ceiling,
}
