"""Acceptance suite: every criterion at its stated scale and tolerance.

Each test prints one PASS/FAIL line (visible under pytest -s; the test
outcome itself carries the same verdict either way).
"""

import json
import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from bcsync.core import ModelConfig
from bcsync.harness import run_ensemble
from bcsync.metrics import (
    check_quasi_sync_in_mean,
    ensemble_mean_diameter,
    prob_extremes_communicating,
    stopping_time,
    theory_constants,
)
from bcsync.presets import dw_preset, general_preset, hk_preset
from bcsync.sampling import CommunicationRule, InertiaPolicy, NoiseModel
from bcsync.verify import (
    verify_escape,
    verify_forced_contraction,
    verify_large_noise,
    verify_pair_activation_probability,
    verify_protocol_hitting,
)

WORKERS = 2


def report(name: str, ok: bool, detail: str = "") -> bool:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {name}: {status}{suffix}")
    return ok


class TestReferenceScenarioEnsemble:
    """40 agents, uniform participation sizes, neighbor-count inertia,
    epsilon 0.1, noise amplitude 0.01, horizon 40000, 100 replicas;
    verdict window t in [15000, 40000]."""

    def test_ensemble_mean_verdict_and_replica_excursions(self):
        config = general_preset(40, 0.1, 0.01, "uniform", "hk_rule")
        seeds = list(range(100))
        horizon = 40_000
        tail_fraction = 0.625  # window starts at step 15000
        stats, records = run_ensemble(config, seeds, horizon, workers=WORKERS)
        verdict = check_quasi_sync_in_mean(stats, config.epsilon, tail_fraction)
        assert verdict.window_start == 15_000

        exceed = np.mean(
            [r.diameters[verdict.window_start :].max() > config.epsilon for r in records]
        )
        se = math.sqrt(max(exceed * (1 - exceed), 0.3 * 0.7) / len(records))
        part_b = exceed >= 0.30 - 3 * se

        report(
            "mean-diameter verdict over the tail window",
            verdict.passed,
            f"worst mean+band {verdict.worst_value:.4f} vs epsilon {config.epsilon}",
        )
        report(
            "replica excursions above epsilon in the window",
            part_b,
            f"fraction {exceed:.2f} vs floor 0.30",
        )
        assert part_b
        assert verdict.passed, (
            f"ensemble tail mean verdict failed: worst mean+band "
            f"{verdict.worst_value:.4f} > epsilon {config.epsilon}"
        )


class TestPairActivationProbability:
    """Closed form versus Monte Carlo for 2, 5, and 40 agents under full,
    uniform, and pairwise size rules; uniform sizes give exactly 1/3."""

    def test_closed_form_one_third_for_uniform_sizes(self):
        ok = True
        for n in (2, 5, 40):
            exact_fraction = sum(
                Fraction(1, n + 1) * k * (k - 1) for k in range(2, n + 1)
            ) / (n * (n - 1))
            value = prob_extremes_communicating(CommunicationRule.uniform(n), n)
            ok = ok and exact_fraction == Fraction(1, 3)
            ok = ok and abs(value - 1.0 / 3.0) <= 1e-15
        assert report("uniform-size pair activation equals 1/3", ok)

    @pytest.mark.parametrize("n", [2, 5, 40])
    @pytest.mark.parametrize("rule", ["full", "uniform", "fixed:2"])
    def test_monte_carlo_matches_closed_form(self, n, rule):
        spec = f"fixed:{n}" if rule == "full" else rule
        config = general_preset(n, 0.5, 0.01, spec, "hk_rule")
        verdict = verify_pair_activation_probability(config, steps=100_000, seed=7)
        assert report(
            f"pair activation n={n} rule={rule}",
            verdict["passed"],
            f"freq {verdict['empirical']['frequency']:.4f} "
            f"vs exact {verdict['theory']['exact']:.4f}",
        )


class TestForcedParticipationContraction:
    """Four agents, epsilon 0.5, inertia floor 0.2, noise at the amplitude
    ceiling, extremes forced into every communicating set for 6 steps:
    every run must contract below 0.25 - 0.2*0.5/6 and respect the
    per-step growth envelope. Zero tolerance."""

    def test_all_runs_contract(self):
        delta = 0.2 * 1.0 * 0.5 / (2 * 4 * (4 - 1) ** 2)
        assert delta == pytest.approx(1.389e-3, rel=1e-3)
        config = ModelConfig(
            n=4,
            epsilon=0.5,
            alpha=0.2,
            inertia=InertiaPolicy.constant(0.2),
            noise=NoiseModel.uniform_noise(delta),
            comm=CommunicationRule.uniform(4),
        )
        verdict = verify_forced_contraction(config, lam=1.0, runs=1000, seed=0)
        assert verdict["theory"]["window"] == 6
        assert verdict["theory"]["final_bound"] == pytest.approx(0.2333, rel=1e-3)
        ok = (
            verdict["empirical"]["contraction_ok"] == 1000
            and verdict["empirical"]["envelope_ok"] == 1000
        )
        assert report(
            "forced-participation contraction 1000/1000",
            ok,
            f"worst final diameter {verdict['empirical']['worst_final_diameter']:.4f} "
            f"vs bound {verdict['theory']['final_bound']:.4f}",
        )


class TestInwardProtocolHitting:
    """Five agents starting at 0/1, inward noise protocol at magnitude 0.1:
    the diameter must reach 0.5 within the horizon in every run."""

    def test_every_run_hits_threshold(self):
        config = general_preset(5, 0.5, 0.1, "uniform", "hk_rule")
        verdict = verify_protocol_hitting(
            config, lam=1.0, runs=1000, horizon=10_000, seed=0, emit=0.1
        )
        assert report(
            "inward protocol finite hitting 1000/1000",
            verdict["passed"],
            f"max stopping time {verdict['empirical']['max_time']}",
        )
        assert verdict["empirical"]["finite"] == 1000


class TestOutwardProtocolEscape:
    """Three agents, uniform sizes, two-point noise at 0.25 (four escape
    steps): the full-spread probability over 10^4 windows must beat the
    analytical floor (one-sided, 3 sigma)."""

    def test_escape_probability_floor(self):
        config = general_preset(
            3, 0.5, 0.25, "uniform", "hk_rule", noise=NoiseModel.two_point(0.25)
        )
        verdict = verify_escape(config, windows=10_000, seed=0)
        assert verdict["theory"]["escape_steps"] == 4
        assert verdict["theory"]["bound"] == pytest.approx(2.0**-16, rel=1e-12)
        assert verdict["empirical"]["sup_spread_frequency"] > 0.0
        assert report(
            "outward protocol escape probability",
            verdict["passed"],
            f"freq {verdict['empirical']['end_spread_frequency']:.4f} "
            f"vs floor {verdict['theory']['bound']:.2e}",
        )


class TestLargeNoiseDestruction:
    """Ten agents, epsilon 0.4, synchronous averaging, noise atoms at 0.8:
    the tail ensemble mean diameter stays above epsilon (3 sigma)."""

    def test_tail_mean_above_epsilon(self):
        config = hk_preset(10, 0.4, 0.01)
        verdict = verify_large_noise(
            config, p=0.5, replicas=50, horizon=5000, seed=0, workers=WORKERS
        )
        assert verdict["theory"]["atom"] == pytest.approx(0.8)
        assert report(
            "large-noise tail mean above epsilon",
            verdict["passed"],
            f"tail mean {verdict['empirical']['tail_mean']:.4f} "
            f"- 3se > {config.epsilon}",
        )


class TestPairwiseModelSmallNoiseSyncInMean:
    """Ten agents, pairwise interactions with mixing weight 0.5, epsilon
    0.2, noise at half the analytical ceiling; horizon grows until every
    replica's diameter has reached epsilon/4, capped at 10^6."""

    def test_sync_in_mean_at_half_ceiling(self):
        config = dw_preset(10, 0.2, 0.5, 1e-6)
        try:
            constants = theory_constants(1.0, 1.0, config)
        except ValueError as err:
            report(
                "pairwise small-noise sync in mean",
                False,
                f"analytical ceiling not computable: {err}",
            )
            pytest.fail(f"noise ceiling evaluation failed: {err}")
        delta = 0.5 * constants.noise_ceiling
        noisy = replace(config, noise=NoiseModel.uniform_noise(delta))
        replicas = 20
        horizon = 10_000
        while True:
            stats, records = run_ensemble(
                noisy, list(range(replicas)), horizon, workers=WORKERS
            )
            hits = [stopping_time(r.diameters, config.epsilon / 4.0) for r in records]
            if all(h is not None for h in hits) or horizon >= 10**6:
                break
            horizon = min(horizon * 2, 10**6)
        all_reached = all(h is not None for h in hits)
        verdict = check_quasi_sync_in_mean(stats, config.epsilon, 0.25)
        ok = all_reached and verdict.passed
        report(
            "pairwise small-noise sync in mean",
            ok,
            f"horizon {horizon}, all replicas reached epsilon/4: {all_reached}",
        )
        assert all_reached, "not every replica reached epsilon/4 within the cap"
        assert verdict.passed


class TestPointwiseBoundedEnsemblesPassMeanVerdict:
    """Ensembles built so every replica's tail diameter stays at or below
    epsilon pointwise (synchronous averaging, tight initial spread, noise
    below the synchronous ceiling): the mean verdict passes in all of them."""

    def test_mean_verdict_passes_in_every_constructed_ensemble(self):
        cases = [(4, 0.5), (5, 0.8), (6, 1.0)]
        all_ok = True
        for base_seed, (n, epsilon) in enumerate(cases * 2):
            sync_ceiling = (1.0 / n) * epsilon / (n * (n - 1) ** 2)
            config = hk_preset(n, epsilon, 0.9 * sync_ceiling)
            initial = np.linspace(0.5 - epsilon / 4, 0.5 + epsilon / 4, n)
            seeds = [100 * base_seed + r for r in range(10)]
            stats, records = run_ensemble(config, seeds, 400, initial=initial)
            window = int(round(0.75 * 400))
            premise = all(
                r.diameters[window:].max() <= epsilon for r in records
            )
            verdict = check_quasi_sync_in_mean(stats, epsilon, 0.25)
            assert premise, "construction failed to bound every replica tail"
            all_ok = all_ok and verdict.passed
        assert report(
            "pointwise-bounded ensembles pass the mean verdict",
            all_ok,
            "6/6 constructed ensembles",
        )


class TestDeterminismAndAggregation:
    """Identical manifests give byte-identical outputs; parallel and
    sequential aggregation agree to 1e-12 per step."""

    def test_byte_identical_outputs_and_parallel_aggregates(self, tmp_path):
        config = general_preset(10, 0.3, 0.01, "uniform", "hk_rule")
        seeds = list(range(6))
        out1, out2 = tmp_path / "one", tmp_path / "two"
        run_ensemble(config, seeds, 500, outdir=out1)
        run_ensemble(config, seeds, 500, outdir=out2)
        byte_identical = all(
            (out1 / name).read_bytes() == (out2 / name).read_bytes()
            for name in ["summary.json"] + [f"replica_{r:04d}.csv" for r in range(6)]
        )
        manifests = [
            json.loads((out / "manifest.json").read_text()) for out in (out1, out2)
        ]
        for manifest in manifests:
            manifest.pop("output_dir")  # points at the two distinct targets
        byte_identical = byte_identical and manifests[0] == manifests[1]

        seq_stats, seq_records = run_ensemble(config, seeds, 500, workers=1)
        par_stats, par_records = run_ensemble(config, seeds, 500, workers=WORKERS)
        records_equal = all(
            np.array_equal(a.diameters, b.diameters)
            for a, b in zip(seq_records, par_records)
        )
        mean_close = np.max(np.abs(par_stats.mean - seq_stats.mean)) <= 1e-12
        folded = ensemble_mean_diameter(
            [r.diameters for r in seq_records], mode="fold"
        )
        fold_close = np.max(np.abs(folded.mean - seq_stats.mean)) <= 1e-12

        ok = byte_identical and records_equal and mean_close and fold_close
        assert report(
            "determinism and aggregation invariants",
            ok,
            "byte-identical outputs, parallel == sequential",
        )
