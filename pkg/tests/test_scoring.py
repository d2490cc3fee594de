"""Scoring function, energy assignment, and seed scheduling."""

from random import Random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshfuzz.coverage import ChannelGain
from meshfuzz.errors import ConfigError
from meshfuzz.scoring import (EnergyPolicy, ExecutionRecord, ScoreReference,
                              ScoreWeights, SeedScheduler, assign_energy,
                              coverage_reward, efficiency_reward, score)


def gains_of(*values):
    return tuple(ChannelGain(i, 0, v) for i, v in enumerate(values))


def straight_line_score(w1, w2, beta, alphas, cs, t):
    """Independent re-implementation: literal weighted sums."""
    rc = 0.0
    for a, c in zip(alphas, cs):
        rc += a * c
    total_c = 0.0
    for c in cs:
        total_c += c
    re = beta * (1.0 / t) * total_c
    return rc, re, w1 * rc + w2 * re


class TestRewards:
    def test_single_channel_identity(self):
        weights = ScoreWeights(1, 0, 0.1, (1.0,))
        assert coverage_reward(gains_of(0.5), weights) == pytest.approx(0.5)

    def test_hand_arithmetic(self):
        weights = ScoreWeights(0.7, 0.3, 0.1, (0.4, 0.2, 0.2, 0.2))
        assert coverage_reward(gains_of(0.01, 0, 0.005, 0), weights) == \
            pytest.approx(0.005, rel=1e-12)

    def test_no_gain_is_zero(self):
        weights = ScoreWeights(0.7, 0.3, 0.1, (0.4, 0.2, 0.2, 0.2))
        assert coverage_reward(gains_of(0, 0, 0, 0), weights) == 0.0

    def test_length_mismatch(self):
        weights = ScoreWeights(0.7, 0.3, 0.1, (0.4, 0.6))
        with pytest.raises(ConfigError):
            coverage_reward(gains_of(0.1), weights)

    def test_efficiency_unit_scaling(self):
        weights = ScoreWeights(1, 1, 1.0, (1.0,))
        record = ExecutionRecord(gains_of(0.2), 1.0)
        assert efficiency_reward(record, weights) == pytest.approx(0.2)

    def test_efficiency_hand_arithmetic(self):
        weights = ScoreWeights(0.7, 0.3, 0.1, (0.4, 0.2, 0.2, 0.2))
        record = ExecutionRecord(gains_of(0.01, 0, 0.005, 0), 0.05)
        assert efficiency_reward(record, weights) == pytest.approx(0.03, rel=1e-12)

    def test_efficiency_zero_gain(self):
        weights = ScoreWeights(0.7, 0.3, 0.1, (0.4, 0.2, 0.2, 0.2))
        for t in (0.001, 0.5, 100.0):
            assert efficiency_reward(ExecutionRecord(gains_of(0, 0, 0, 0), t),
                                     weights) == 0.0

    def test_time_floor_prevents_blowup(self):
        weights = ScoreWeights(0, 1, 1.0, (1.0,))
        fast = ExecutionRecord(gains_of(0.1), 1e-9)
        assert efficiency_reward(fast, weights, time_floor_s=0.001) == \
            pytest.approx(0.1 / 0.001)


class TestScore:
    def test_hand_composition(self):
        weights = ScoreWeights(0.7, 0.3, 0.1, (0.4, 0.2, 0.2, 0.2))
        got = score(ExecutionRecord(gains_of(0.01, 0, 0.005, 0), 0.05), weights)
        assert got.rc == pytest.approx(0.005, rel=1e-12)
        assert got.re == pytest.approx(0.03, rel=1e-12)
        assert got.s == pytest.approx(0.0125, rel=1e-12)

    def test_coverage_only_and_efficiency_only(self):
        record = ExecutionRecord(gains_of(0.01, 0.02), 0.1)
        cov_only = score(record, ScoreWeights(1, 0, 0.1, (0.5, 0.5)))
        assert cov_only.s == pytest.approx(cov_only.rc)
        eff_only = score(record, ScoreWeights(0, 1, 0.1, (0.5, 0.5)))
        assert eff_only.s == pytest.approx(eff_only.re)

    def test_against_straight_line_reimplementation(self):
        rng = Random(5)
        for _ in range(1000):
            n = rng.randrange(1, 6)
            alphas = tuple(rng.random() for _ in range(n))
            if not any(alphas):
                alphas = (1.0,) + alphas[1:]
            w1, w2, beta = rng.random(), rng.random(), rng.random()
            if w1 == 0 and w2 == 0:
                w1 = 1.0
            cs = [rng.random() * 0.01 for _ in range(n)]
            t = 0.001 + rng.random()
            weights = ScoreWeights(w1, w2, beta, alphas)
            got = score(ExecutionRecord(gains_of(*cs), t), weights)
            rc, re, s = straight_line_score(w1, w2, beta, alphas, cs, t)
            assert got.rc == pytest.approx(rc, rel=1e-12, abs=1e-15)
            assert got.re == pytest.approx(re, rel=1e-12, abs=1e-15)
            assert got.s == pytest.approx(s, rel=1e-12, abs=1e-15)

    def test_linearity_coefficient(self):
        # ds/dC_i = w1*alpha_i + w2*beta/T
        weights = ScoreWeights(0.7, 0.3, 0.1, (0.4, 0.2, 0.2, 0.2))
        t = 0.25
        base = score(ExecutionRecord(gains_of(0, 0, 0, 0), t), weights).s
        for i in range(4):
            cs = [0.0] * 4
            cs[i] = 0.001
            bumped = score(ExecutionRecord(gains_of(*cs), t), weights).s
            coeff = (bumped - base) / 0.001
            assert coeff == pytest.approx(0.7 * weights.alphas[i] + 0.3 * 0.1 / t,
                                          rel=1e-9)

    def test_argmax_invariant_under_common_scaling(self):
        rng = Random(6)
        records = [ExecutionRecord(gains_of(rng.random() * 0.01,
                                            rng.random() * 0.01), 0.01 + rng.random())
                   for _ in range(20)]
        w = ScoreWeights(0.7, 0.3, 0.1, (0.6, 0.4))
        w_scaled = ScoreWeights(0.7 * 3.7, 0.3 * 3.7, 0.1, (0.6, 0.4))
        order = sorted(range(20), key=lambda i: score(records[i], w).s)
        order_scaled = sorted(range(20), key=lambda i: score(records[i], w_scaled).s)
        assert order == order_scaled

    def test_weight_validation(self):
        with pytest.raises(ConfigError):
            ScoreWeights(0, 0, 0.1, (1.0,))
        with pytest.raises(ConfigError):
            ScoreWeights(0.5, 0.5, 0.1, (0.0, 0.0))
        with pytest.raises(ConfigError):
            ScoreWeights(-0.1, 0.5, 0.1, (1.0,))

    def test_defaults_split(self):
        weights = ScoreWeights.defaults(4)
        assert weights.alphas[0] == pytest.approx(0.4)
        assert sum(weights.alphas) == pytest.approx(1.0)
        assert weights.main_only().alphas == (0.4, 0.0, 0.0, 0.0)


class TestEnergy:
    POLICY = EnergyPolicy(e_min=16, e_max=1024, s_ref=0.05)

    def test_floor_and_ceiling(self):
        assert assign_energy(0.0, self.POLICY) == 16
        assert assign_energy(0.05, self.POLICY) == 1024
        assert assign_energy(5.0, self.POLICY) == 1024

    def test_hand_value(self):
        assert assign_energy(0.0125, self.POLICY) == 268

    def test_energy_ratio_example(self):
        policy = EnergyPolicy(16, 1024, 0.1)
        assert assign_energy(0.1, policy) == 1024
        assert assign_energy(0.0, policy) == 16
        assert assign_energy(0.1, policy) // assign_energy(0.0, policy) == 64

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 10), st.floats(0, 10))
    def test_monotone(self, s1, s2):
        lo, hi = sorted((s1, s2))
        assert assign_energy(lo, self.POLICY) <= assign_energy(hi, self.POLICY)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 100))
    def test_bounds(self, s):
        assert 16 <= assign_energy(s, self.POLICY) <= 1024

    def test_negative_score_rejected(self):
        with pytest.raises(ConfigError):
            assign_energy(-0.1, self.POLICY)


class TestScoreReference:
    def test_percentile_of_positive_scores(self):
        ref = ScoreReference(percentile=95.0, floor=1e-6)
        for _ in range(1000):
            ref.observe(0.0)
        for v in range(1, 101):
            ref.observe(v / 100.0)
        s_ref = ref.recompute()
        assert 0.9 <= s_ref <= 1.0

    def test_floor_without_observations(self):
        ref = ScoreReference(floor=1e-6)
        assert ref.recompute() == 1e-6


class _FakeSeed:
    def __init__(self, name, favored=False):
        self.name = name
        self.favored = favored


class TestScheduler:
    def test_single_seed_always_selected(self):
        sched = SeedScheduler(Random(0), p_skip=0.9)
        seed = _FakeSeed("only")
        for _ in range(10):
            assert sched.select([seed]) is seed

    def test_strict_alternation_without_skip(self):
        sched = SeedScheduler(Random(0), p_skip=0.0)
        a, b = _FakeSeed("a"), _FakeSeed("b")
        picks = [sched.select([a, b]).name for _ in range(6)]
        assert picks == ["a", "b", "a", "b", "a", "b"]

    def test_empty_queue_rejected(self):
        with pytest.raises(ConfigError):
            SeedScheduler(Random(0)).select([])

    def test_favored_seeds_preferred(self):
        sched = SeedScheduler(Random(42), p_skip=0.75)
        favored = _FakeSeed("fav", favored=True)
        others = [_FakeSeed(f"n{i}") for i in range(3)]
        picks = [sched.select([favored] + others).name for _ in range(400)]
        share = picks.count("fav") / len(picks)
        assert share > 1 / 4  # favored never skipped, others often are

    def test_no_starvation(self):
        sched = SeedScheduler(Random(7), p_skip=0.9)
        favored = _FakeSeed("fav", favored=True)
        others = [_FakeSeed(f"n{i}") for i in range(5)]
        queue = [favored] + others
        picks = [sched.select(queue).name for _ in range(2000)]
        for seed in others:
            assert seed.name in picks

    def test_cycles_counted(self):
        sched = SeedScheduler(Random(0), p_skip=0.0)
        queue = [_FakeSeed("a"), _FakeSeed("b")]
        assert sched.cycles == 0
        for _ in range(5):
            sched.select(queue)
        assert sched.cycles == 2
