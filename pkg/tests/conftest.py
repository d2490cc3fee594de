import pytest

from meshfuzz.fuzzcore.config import CampaignConfig


@pytest.fixture
def make_config(tmp_path):
    """Campaign config factory tuned for fast integration tests."""

    def make(**overrides):
        values = dict(
            work_dir=str(tmp_path / "out"),
            budget_s=0.0,
            max_execs=150,
            rng_seed=3,
            sweep_k=4,
            settle_delay_ms=0.0,
            scoring_time="fixed",
            restart_storm_limit=1000,
            stats_interval_s=1.0,
        )
        values.update(overrides)
        return CampaignConfig(**values)

    return make
