"""Samplers: distribution laws, independence, reproducibility."""

import itertools

import numpy as np
import pytest

from bcsync.sampling import (
    CommunicationRule,
    InertiaPolicy,
    NoiseModel,
    RngStream,
    _sample_comm_set_from_probs,
    inertia_coefficients,
    sample_comm_set,
    sample_noise,
    stream,
    trajectory_streams,
)

# Chi-square critical value for df=3 at the 0.001 level.
CHI2_CRIT_DF3_P001 = 16.266


class TestCommunicationRule:
    def test_sum_must_be_one(self):
        with pytest.raises(ValueError):
            CommunicationRule(size_probs=(0.2, 0.2, 0.2))

    def test_p0_plus_p1_must_be_below_one(self):
        with pytest.raises(ValueError, match="p_0 \\+ p_1"):
            CommunicationRule(size_probs=(0.5, 0.5, 0.0))

    def test_fixed_zero_or_one_rejected(self):
        with pytest.raises(ValueError):
            CommunicationRule.fixed(4, 0)
        with pytest.raises(ValueError):
            CommunicationRule.fixed(4, 1)

    def test_uniform_rule(self):
        rule = CommunicationRule.uniform(3)
        assert rule.size_probs == (0.25, 0.25, 0.25, 0.25)

    def test_fixed_rule(self):
        rule = CommunicationRule.fixed(3, 3)
        assert rule.size_probs == (0.0, 0.0, 0.0, 1.0)

    def test_wrong_length_for_model(self):
        with pytest.raises(ValueError):
            CommunicationRule.uniform(3).validate_for(4)


class TestSampleCommSet:
    def test_forced_full_participation(self):
        rng = stream(0, 0, "comm")
        rule = CommunicationRule.fixed(5, 5)
        for _ in range(50):
            assert np.array_equal(sample_comm_set(rng, rule, 5), np.arange(5))

    def test_degenerate_all_silent_mechanics(self):
        # p_0 = 1 violates the rule invariant; exercised through the raw
        # sampler to pin the size-law mechanics.
        rng = stream(1, 0, "comm")
        for _ in range(20):
            assert _sample_comm_set_from_probs(rng, [1.0, 0.0, 0.0, 0.0], 3).size == 0

    def test_membership_probability_uniform_sizes(self):
        # P{i in U} = sum_k p_k * k/n = 1/2 for uniform sizes on n=3.
        rng = stream(7, 0, "comm")
        rule = CommunicationRule.uniform(3)
        draws = 20_000
        hits = np.zeros(3)
        for _ in range(draws):
            comm = sample_comm_set(rng, rule, 3)
            hits[comm] += 1
        se = np.sqrt(0.5 * 0.5 / draws)
        assert np.all(np.abs(hits / draws - 0.5) <= 3 * se)

    def test_membership_symmetric_across_agents(self):
        rng = stream(11, 0, "comm")
        rule = CommunicationRule(size_probs=(0.3, 0.1, 0.2, 0.1, 0.3))
        draws = 20_000
        hits = np.zeros(4)
        for _ in range(draws):
            hits[sample_comm_set(rng, rule, 4)] += 1
        freq = hits / draws
        exact = sum(p * k / 4 for k, p in enumerate(rule.size_probs))
        se = np.sqrt(exact * (1 - exact) / draws)
        assert np.all(np.abs(freq - exact) <= 3 * se)

    def test_pairs_uniform_given_size_two(self):
        # Conditioned on |U| = 2, each of the C(4,2)=6 pairs has frequency 1/6.
        rng = stream(3, 0, "comm")
        rule = CommunicationRule.uniform(4)
        counts = {pair: 0 for pair in itertools.combinations(range(4), 2)}
        conditioned = 0
        for _ in range(30_000):
            comm = sample_comm_set(rng, rule, 4)
            if comm.size == 2:
                counts[tuple(comm)] += 1
                conditioned += 1
        se = np.sqrt((1 / 6) * (5 / 6) / conditioned)
        for pair, count in counts.items():
            assert abs(count / conditioned - 1 / 6) <= 3 * se, pair

    def test_size_law_frequencies(self):
        rng = stream(5, 0, "comm")
        rule = CommunicationRule(size_probs=(0.1, 0.2, 0.3, 0.4))
        draws = 20_000
        sizes = np.zeros(4)
        for _ in range(draws):
            sizes[sample_comm_set(rng, rule, 3).size] += 1
        for k, p in enumerate(rule.size_probs):
            se = np.sqrt(p * (1 - p) / draws)
            assert abs(sizes[k] / draws - p) <= 3 * se


class TestNoiseModel:
    def test_uniform_support_bound(self):
        rng = stream(2, 0, "noise")
        model = NoiseModel.uniform_noise(0.01)
        draws = sample_noise(rng, model, 10_000)
        assert np.abs(draws).max() <= 0.01

    def test_two_point_atoms_and_balance(self):
        rng = stream(4, 0, "noise")
        model = NoiseModel.two_point(0.8)
        draws = sample_noise(rng, model, 100_000)
        assert set(np.unique(draws)) == {-0.8, 0.8}
        plus = (draws > 0).mean()
        assert abs(plus - 0.5) <= 3 * np.sqrt(0.25 / draws.size)

    def test_uniform_variance_moment(self):
        # Sample variance of U[-delta, delta] is delta^2/3; the standard
        # error of the sample variance uses the fourth moment delta^4/5.
        delta = 0.01
        rng = stream(6, 0, "noise")
        draws = sample_noise(rng, NoiseModel.uniform_noise(delta), 1_000_000)
        target = delta**2 / 3.0
        se = np.sqrt((delta**4 / 5.0 - target**2) / draws.size)
        assert abs(draws.var(ddof=1) - target) <= 3 * se

    def test_custom_discrete_zero_mean_enforced(self):
        with pytest.raises(ValueError, match="zero mean"):
            NoiseModel(kind="custom_discrete", delta=1.0, atoms=(0.5, 1.0), weights=(0.5, 0.5))

    def test_custom_atom_above_delta_rejected(self):
        with pytest.raises(ValueError):
            NoiseModel(kind="custom_discrete", delta=0.5, atoms=(-0.8, 0.8), weights=(0.5, 0.5))

    def test_degenerate_disabled_model(self):
        model = NoiseModel.disabled()
        assert model.degenerate
        assert np.array_equal(sample_noise(stream(0, 0, "noise"), model, 5), np.zeros(5))

    def test_band_probability(self):
        assert NoiseModel.uniform_noise(0.2).band_probability(0.1) == pytest.approx(0.25)
        assert NoiseModel.two_point(0.25).band_probability(0.25) == pytest.approx(0.5)

    def test_protocol_band_defaults(self):
        low, p = NoiseModel.uniform_noise(0.2).protocol_band()
        assert (low, p) == (0.1, 0.25)
        low, p = NoiseModel.two_point(0.25).protocol_band()
        assert (low, p) == (0.25, 0.5)


class TestInertiaCoefficients:
    def test_neighbor_count_rule(self):
        # Agent 0 with 3 neighbors inside the communicating set: 1/(3+1).
        x = np.array([0.5, 0.52, 0.48, 0.51, 0.9])
        coeffs = inertia_coefficients(
            stream(0, 0, "inertia"), InertiaPolicy.hk(), x, np.array([0, 1, 2, 3]), 0.1
        )
        assert coeffs[0] == 0.25

    def test_constant_everywhere(self):
        coeffs = inertia_coefficients(
            stream(0, 0, "inertia"), InertiaPolicy.constant(0.5), np.zeros(4), np.array([0, 1]), 0.1
        )
        assert np.all(coeffs == 0.5)

    def test_uniform_interval_mean(self):
        rng = stream(9, 0, "inertia")
        policy = InertiaPolicy(kind="uniform_interval", low=0.1, high=0.9)
        draws = np.concatenate(
            [inertia_coefficients(rng, policy, np.zeros(10), np.arange(10), 0.1) for _ in range(10_000)]
        )
        se = (0.8 / np.sqrt(12.0)) / np.sqrt(draws.size)
        assert abs(draws.mean() - 0.5) <= 3 * se
        assert draws.min() >= 0.1 and draws.max() <= 0.9


class TestStreams:
    def test_identical_keys_identical_draws(self):
        a = RngStream(42, 3, "noise").generator().random(100)
        b = RngStream(42, 3, "noise").generator().random(100)
        assert np.array_equal(a, b)

    def test_distinct_purposes_distinct_draws(self):
        a = stream(42, 0, "comm").random(50)
        b = stream(42, 0, "noise").random(50)
        assert not np.array_equal(a, b)

    def test_distinct_replicas_distinct_draws(self):
        a = stream(42, 0, "noise").random(50)
        b = stream(42, 1, "noise").random(50)
        assert not np.array_equal(a, b)

    def test_trajectory_streams_cover_purposes(self):
        streams = trajectory_streams(0, 0)
        assert set(streams) == {"comm", "noise", "inertia", "init"}

    def test_unknown_purpose_rejected(self):
        with pytest.raises(ValueError):
            RngStream(0, 0, "nope").generator()

    def test_comm_and_noise_streams_independent(self):
        # Joint frequencies of (comm size, sign of agent-0 noise) must not
        # reject independence: chi-square below the df=3 critical value at
        # the 0.001 level.
        streams = trajectory_streams(123, 0)
        rule = CommunicationRule.uniform(3)
        model = NoiseModel.uniform_noise(0.01)
        steps = 20_000
        table = np.zeros((4, 2))
        for _ in range(steps):
            k = sample_comm_set(streams["comm"], rule, 3).size
            sign = int(sample_noise(streams["noise"], model, 3)[0] > 0)
            table[k, sign] += 1
        expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / steps
        chi2 = float(((table - expected) ** 2 / expected).sum())
        assert chi2 < CHI2_CRIT_DF3_P001

    def test_consecutive_steps_independent_product_law(self):
        # Probability that both extremes communicate on 3 consecutive draws
        # equals the single-step probability cubed (independent steps).
        rng = stream(17, 0, "comm")
        rule = CommunicationRule.uniform(3)
        x = np.array([0.0, 0.5, 1.0])
        single = 1.0 / 3.0  # uniform sizes: sum_k p_k k(k-1)/(n(n-1))
        windows = 30_000
        hits = 0
        for _ in range(windows):
            ok = True
            for _ in range(3):
                comm = sample_comm_set(rng, rule, 3)
                ok = ok and (0 in comm and 2 in comm)
            hits += ok
        expected = single**3
        se = np.sqrt(expected * (1 - expected) / windows)
        assert abs(hits / windows - expected) <= 3 * se
