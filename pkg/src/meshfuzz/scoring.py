"""Seed scoring and mutation-energy scheduling.

A test case is scored as a weighted combination of two rewards: a coverage
reward (alpha-weighted sum of per-channel normalized gains) and an efficiency
reward (the plain gain sum scaled by beta and divided by execution time).
The score then maps linearly onto a mutation-energy budget between e_min and
e_max, saturating at a reference score.
"""

from dataclasses import dataclass
from random import Random

from meshfuzz.coverage import ChannelGain
from meshfuzz.errors import ConfigError

#: Execution times below this are clamped before dividing (timer quantization
#: would otherwise make the efficiency reward unbounded).
DEFAULT_TIME_FLOOR_S = 0.001

DEFAULT_P_SKIP = 0.75


@dataclass(frozen=True)
class ScoreWeights:
    """Weights of the scoring function: w1/w2 blend the two rewards, beta
    scales the efficiency term, alphas weight the per-channel gains."""

    w1: float
    w2: float
    beta: float
    alphas: tuple[float, ...]

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0 or self.beta < 0 or any(a < 0 for a in self.alphas):
            raise ConfigError("score weights must be nonnegative")
        if self.w1 == 0 and self.w2 == 0:
            raise ConfigError("at least one of w1, w2 must be positive")
        if not self.alphas or not any(self.alphas):
            raise ConfigError("at least one channel alpha must be positive")

    @classmethod
    def defaults(cls, n_channels: int, w1: float = 0.7, w2: float = 0.3,
                 beta: float = 0.1, alpha_main: float = 0.4) -> "ScoreWeights":
        """Main channel gets alpha_main; the rest share the remainder equally."""
        if n_channels < 1:
            raise ConfigError("need at least one channel")
        if n_channels == 1:
            alphas = (1.0,)
        else:
            rest = (1.0 - alpha_main) / (n_channels - 1)
            alphas = (alpha_main,) + (rest,) * (n_channels - 1)
        return cls(w1, w2, beta, alphas)

    def main_only(self) -> "ScoreWeights":
        """Zero every non-main alpha (the single-channel baseline)."""
        alphas = (self.alphas[0],) + (0.0,) * (len(self.alphas) - 1)
        return ScoreWeights(self.w1, self.w2, self.beta, alphas)


@dataclass(frozen=True)
class ScoreBreakdown:
    rc: float
    re: float
    s: float


@dataclass(frozen=True)
class ExecutionRecord:
    """Per-channel gains plus wall-clock execution time of one test case."""

    gains: tuple[ChannelGain, ...]
    exec_time_s: float

    def __post_init__(self):
        if self.exec_time_s <= 0:
            raise ConfigError("exec_time_s must be positive (clamp before recording)")


@dataclass(frozen=True)
class EnergyPolicy:
    """Bounds and reference score of the score-to-energy mapping."""

    e_min: int
    e_max: int
    s_ref: float

    def __post_init__(self):
        if self.e_min < 1 or self.e_max < self.e_min:
            raise ConfigError("need 1 <= e_min <= e_max")
        if self.s_ref <= 0:
            raise ConfigError("s_ref must be positive")


def coverage_reward(gains: tuple[ChannelGain, ...], weights: ScoreWeights) -> float:
    """Alpha-weighted sum of per-channel gains."""
    if len(gains) != len(weights.alphas):
        raise ConfigError(
            f"got {len(gains)} gains for {len(weights.alphas)} channel weights")
    return sum(a * g.gain for a, g in zip(weights.alphas, gains))


def efficiency_reward(record: ExecutionRecord, weights: ScoreWeights,
                      time_floor_s: float = DEFAULT_TIME_FLOOR_S) -> float:
    """beta * (1 / exec_time) * sum of gains, with the time clamped to a floor."""
    t = max(record.exec_time_s, time_floor_s)
    return weights.beta * (1.0 / t) * sum(g.gain for g in record.gains)


def score(record: ExecutionRecord, weights: ScoreWeights,
          time_floor_s: float = DEFAULT_TIME_FLOOR_S) -> ScoreBreakdown:
    """Total score s = w1 * rc + w2 * re."""
    rc = coverage_reward(record.gains, weights)
    re = efficiency_reward(record, weights, time_floor_s)
    return ScoreBreakdown(rc=rc, re=re, s=weights.w1 * rc + weights.w2 * re)


def assign_energy(s: float, policy: EnergyPolicy) -> int:
    """Map a score to a mutation count: linear in s, clamped to [e_min, e_max]."""
    if s < 0:
        raise ConfigError("score must be nonnegative")
    frac = min(s / policy.s_ref, 1.0)
    energy = round(policy.e_min + (policy.e_max - policy.e_min) * frac)
    return max(policy.e_min, min(policy.e_max, energy))


class ScoreReference:
    """Running reference score: 95th percentile of positive observed scores.

    Zero-score executions dominate any campaign, so including them would pin
    the percentile to the floor and flatten the energy mapping; only positive
    scores enter the distribution. Recomputed once per queue cycle.
    """

    def __init__(self, percentile: float = 95.0, floor: float = 1e-6):
        if not 0 < percentile <= 100:
            raise ConfigError("percentile must be in (0, 100]")
        self.percentile = percentile
        self.floor = floor
        self._positive_scores: list[float] = []
        self.s_ref = floor

    def observe(self, s: float) -> None:
        if s > 0:
            self._positive_scores.append(s)

    def recompute(self) -> float:
        if self._positive_scores:
            ordered = sorted(self._positive_scores)
            rank = (self.percentile / 100.0) * (len(ordered) - 1)
            lo = int(rank)
            hi = min(lo + 1, len(ordered) - 1)
            value = ordered[lo] + (ordered[hi] - ordered[lo]) * (rank - lo)
            self.s_ref = max(value, self.floor)
        return self.s_ref


class SeedScheduler:
    """Round-robin seed selection with probabilistic skipping.

    Visits the queue in order; while any seed is flagged favored, each
    non-favored candidate is skipped with probability p_skip. A full lap of
    skips forces the next candidate, so no seed starves. `cycles` counts
    completed laps over the queue (used to recompute the score reference).
    """

    def __init__(self, rng: Random, p_skip: float = DEFAULT_P_SKIP):
        if not 0 <= p_skip < 1:
            raise ConfigError("p_skip must be in [0, 1)")
        self.rng = rng
        self.p_skip = p_skip
        self.cursor = 0
        self.cycles = 0

    def select(self, queue: list) -> object:
        """Return the next seed to mutate. Queue must be nonempty."""
        if not queue:
            raise ConfigError("cannot select from an empty seed queue")
        any_favored = any(seed.favored for seed in queue)
        for attempt in range(len(queue) + 1):
            if self.cursor >= len(queue):
                self.cursor = 0
                self.cycles += 1
            seed = queue[self.cursor]
            self.cursor += 1
            if (any_favored and not seed.favored and attempt < len(queue)
                    and self.rng.random() < self.p_skip):
                continue
            return seed
        raise AssertionError("unreachable: forced pick after a full lap")
