"""Arrival process and class-mix contracts."""

import numpy as np
import pytest
from scipy import stats

from shopsim.kernel import StreamFamily
from shopsim.workload import (
    ArrivalProcess,
    ScenarioMix,
    WorkloadError,
    draw_class,
    next_interarrival,
    per_class_rates,
)

S1 = ScenarioMix(("rare", "ordinary", "frequent"), (0.1, 0.3, 0.6))
S2 = ScenarioMix(("rare", "ordinary", "frequent"), (0.33, 0.34, 0.33))
S3 = ScenarioMix(("rare", "ordinary", "frequent"), (0.5, 0.3, 0.2))


def stream(seed=1, name="arrivals"):
    return StreamFamily(seed).stream(name)


def test_mix_validation():
    with pytest.raises(WorkloadError):
        ScenarioMix(("a", "b"), (0.5, 0.6))
    with pytest.raises(WorkloadError):
        ScenarioMix(("a", "b"), (1.5, -0.5))
    with pytest.raises(WorkloadError):
        ScenarioMix(("a",), (0.5, 0.5))
    with pytest.raises(WorkloadError):
        ArrivalProcess(-1.0, S1)


def test_interarrival_mean_converges():
    process = ArrivalProcess(20.0, S1)
    s = stream(314)
    n = 1_000_000
    total = 0.0
    for _ in range(n):
        total += next_interarrival(process, s)
    assert 0.0498 <= total / n <= 0.0502


def test_interarrival_positive_and_zero_rate_rejected():
    process = ArrivalProcess(20.0, S1)
    s = stream(2)
    assert all(next_interarrival(process, s) > 0.0 for _ in range(10_000))
    with pytest.raises(WorkloadError):
        next_interarrival(ArrivalProcess(0.0, S1), s)


def test_memorylessness_of_interarrivals():
    process = ArrivalProcess(20.0, S1)
    s = stream(55)
    draws = np.array([next_interarrival(process, s) for _ in range(200_000)])
    conditioned = draws[draws > 0.05] - 0.05
    # conditioned-and-shifted sample should again be Exp(1/20)
    result = stats.kstest(conditioned, "expon", args=(0.0, 1.0 / 20.0))
    assert result.pvalue > 0.01


@pytest.mark.parametrize("mix,expected", [(S1, (0.1, 0.3, 0.6)), (S2, (0.33, 0.34, 0.33))])
def test_draw_class_frequencies(mix, expected):
    s = stream(77, "class")
    n = 1_000_000
    counts = {name: 0 for name in mix.classes}
    for _ in range(n):
        counts[draw_class(mix, s)] += 1
    for name, p in zip(mix.classes, expected):
        assert abs(counts[name] / n - p) < 0.005


def test_degenerate_pmf_always_returns_that_class():
    mix = ScenarioMix(("a", "b", "c"), (1.0, 0.0, 0.0))
    s = stream(8, "class")
    assert all(draw_class(mix, s) == "a" for _ in range(1000))


def test_per_class_rates():
    assert per_class_rates(ArrivalProcess(20.0, S1)) == {
        "rare": pytest.approx(2.0),
        "ordinary": pytest.approx(6.0),
        "frequent": pytest.approx(12.0),
    }
    assert per_class_rates(ArrivalProcess(0.0, S1)) == {
        "rare": 0.0,
        "ordinary": 0.0,
        "frequent": 0.0,
    }
    assert per_class_rates(ArrivalProcess(30.0, S3)) == {
        "rare": pytest.approx(15.0),
        "ordinary": pytest.approx(9.0),
        "frequent": pytest.approx(6.0),
    }


def test_thinned_per_class_streams_have_poisson_rates():
    # splitting property: per-class interarrival means within 2% of 1/(rate*p)
    rate = 20.0
    process = ArrivalProcess(rate, S1)
    arrivals = stream(91, "arrivals")
    classes = stream(91, "class")
    horizon = 40_000.0
    t = 0.0
    last_seen = {name: 0.0 for name in S1.classes}
    gaps = {name: [] for name in S1.classes}
    while True:
        t += next_interarrival(process, arrivals)
        if t > horizon:
            break
        name = draw_class(S1, classes)
        gaps[name].append(t - last_seen[name])
        last_seen[name] = t
    for name, p in S1.items():
        mean_gap = sum(gaps[name]) / len(gaps[name])
        assert mean_gap == pytest.approx(1.0 / (rate * p), rel=0.02)


def test_arrival_counts_concentrate_around_mean():
    # 95% of replications land within 4*sqrt(rate*T) of rate*T
    rate, horizon = 5.0, 1000.0
    hits = 0
    reps = 20
    for rep in range(reps):
        s = StreamFamily(1000 + rep).stream("arrivals")
        process = ArrivalProcess(rate, S1)
        t, n = 0.0, 0
        while True:
            t += next_interarrival(process, s)
            if t > horizon:
                break
            n += 1
        if abs(n - rate * horizon) <= 4.0 * (rate * horizon) ** 0.5:
            hits += 1
    assert hits >= 0.95 * reps
