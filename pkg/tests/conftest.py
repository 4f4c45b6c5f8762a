import pytest

from shopsim.config import default_config


def short_cfg(scenario="S1", *, window=600.0, rate=None, seed=777, replications=1, **run_kwargs):
    """A default-model config scaled down for fast tests."""
    cfg = default_config(scenario)
    cfg = cfg.with_run(
        window=float(window), master_seed=seed, replications=replications, **run_kwargs
    )
    if rate is not None:
        cfg = cfg.with_rate(float(rate))
    return cfg


@pytest.fixture
def s1_cfg():
    return short_cfg("S1")
