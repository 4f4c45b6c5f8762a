"""Planner contracts: grids, aggregation, critical-rate interpolation,
replication statistics, and scenario comparison."""

import math

import pytest

from shopsim.farm import DemandReport
from shopsim.planner import (
    CriticalRate,
    SweepCurve,
    SweepSpec,
    analytic_demand,
    compare_scenarios,
    critical_lambda,
    run_point,
    run_sweep,
)

from conftest import short_cfg


# ---------------------------------------------------------------------------
# Grids and interpolation (pure arithmetic)


def test_default_grid_has_61_points():
    spec = SweepSpec()
    rates = spec.rates()
    assert len(rates) == 61
    assert rates[0] == 0.0
    assert rates[-1] == 30.0


def test_single_point_grid():
    spec = SweepSpec(lambda_from=14.0, lambda_to=14.0, lambda_step=0.5)
    assert spec.rates() == [14.0]


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(lambda_from=5.0, lambda_to=1.0)
    with pytest.raises(ValueError):
        SweepSpec(lambda_step=0.0)
    with pytest.raises(ValueError):
        SweepSpec(replications=0)


def test_interpolated_crossing():
    crit = critical_lambda([(14.5, 3.9), (15.0, 4.3)], threshold=4.0)
    assert crit.status == "crossed"
    assert crit.rate == pytest.approx(14.625)
    assert not crit.multiple_crossings


def test_threshold_never_exceeded():
    crit = critical_lambda([(1.0, 1.0), (2.0, 1.5)], threshold=4.0)
    assert crit.status == "not_crossed"
    assert crit.rate is None


def test_first_point_already_over_threshold():
    crit = critical_lambda([(1.0, 9.0), (2.0, 12.0)], threshold=4.0)
    assert crit.status == "below_range"


def test_crossing_invariant_to_points_outside_bracket():
    core = [(14.5, 3.9), (15.0, 4.3)]
    padded = [(5.0, 1.0), (10.0, 1.4), (14.0, 2.9)] + core + [(20.0, 30.0), (25.0, 80.0)]
    assert critical_lambda(padded, 4.0).rate == pytest.approx(
        critical_lambda(core, 4.0).rate
    )


def test_multiple_crossings_take_first_and_flag():
    noisy = [(10.0, 3.8), (11.0, 4.2), (12.0, 3.9), (13.0, 4.5)]
    crit = critical_lambda(noisy, 4.0)
    assert crit.status == "crossed"
    assert crit.multiple_crossings
    assert crit.rate == pytest.approx(10.0 + (4.0 - 3.8) / 0.4)


def test_degenerate_points_are_skipped():
    crit = critical_lambda([(0.0, float("nan")), (14.5, 3.9), (15.0, 4.3)], 4.0)
    assert crit.rate == pytest.approx(14.625)
    with pytest.raises(ValueError):
        critical_lambda([(0.0, float("nan"))], 4.0)


# ---------------------------------------------------------------------------
# Replicated points (small windows for speed)


def test_run_point_is_deterministic():
    cfg = short_cfg("S1", window=300.0, replications=2)
    a = run_point(cfg, 3.0)
    b = run_point(cfg, 3.0)
    assert a.mean_rt == b.mean_rt
    assert a.rt_ci_half == b.rt_ci_half
    assert a.rep_mean_rts == b.rep_mean_rts


def test_run_point_zero_rate_is_degenerate():
    cfg = short_cfg("S1", window=200.0, replications=2)
    point = run_point(cfg, 0.0)
    assert point.degenerate
    assert math.isnan(point.mean_rt)


def test_parallel_matches_sequential():
    cfg = short_cfg("S1", window=300.0, replications=4)
    seq = run_point(cfg, 4.0, workers=1)
    par = run_point(cfg, 4.0, workers=2)
    assert par.rep_mean_rts == seq.rep_mean_rts
    assert par.mean_rt == seq.mean_rt


def test_confidence_interval_shrinks_with_replications():
    cfg = short_cfg("S1", window=300.0, seed=15)
    few = run_point(cfg, 5.0, replications=4)
    many = run_point(cfg, 5.0, replications=16)
    # ~1/sqrt(R) scaling: expect roughly a factor 2, allow generous slack
    assert many.rt_ci_half < few.rt_ci_half
    assert few.rt_ci_half / many.rt_ci_half == pytest.approx(2.0, rel=0.75)


def test_run_sweep_produces_ordered_curve():
    cfg = short_cfg("S1", window=300.0, replications=2)
    spec = SweepSpec(lambda_from=1.0, lambda_to=3.0, lambda_step=1.0, replications=2)
    curve = run_sweep(cfg, spec)
    assert [p.rate for p in curve.points] == [1.0, 2.0, 3.0]
    assert curve.critical.status == "not_crossed"
    assert all(not p.degenerate for p in curve.points)
    assert all(p.rt_ci_half >= 0.0 for p in curve.points)


def test_sweep_includes_degenerate_origin():
    cfg = short_cfg("S1", window=200.0)
    spec = SweepSpec(lambda_from=0.0, lambda_to=1.0, lambda_step=1.0, replications=1)
    curve = run_sweep(cfg, spec)
    assert curve.points[0].degenerate
    assert not curve.points[1].degenerate


def test_heavier_mix_means_slower_responses_at_equal_rate():
    # S1 carries the most frequent shoppers and the largest service demand
    rate = 13.0
    rts = {}
    for scenario in ("S1", "S3"):
        cfg = short_cfg(scenario, window=2400.0, seed=21)
        rts[scenario] = run_point(cfg, rate, replications=1).mean_rt
    assert rts["S1"] > rts["S3"]


# ---------------------------------------------------------------------------
# Comparison


def fake_curve(name, crit_rate):
    curve = SweepCurve(scenario=name, threshold=4.0)
    curve.critical = CriticalRate("crossed", crit_rate)
    return curve


def test_compare_scenarios_orders_by_demand():
    entries = []
    for name in ("S1", "S2", "S3"):
        cfg = short_cfg(name)
        demand = analytic_demand(cfg)
        entries.append((name, fake_curve(name, demand.saturation_rate * 0.97), demand))
    comparison = compare_scenarios(entries)
    assert comparison.ordering_consistent
    rows = {r["scenario"]: r for r in comparison.rows}
    assert rows["S1"]["bottleneck"] == "WS"
    assert rows["S1"]["total_demand"] > rows["S2"]["total_demand"] > rows["S3"]["total_demand"]
    assert rows["S1"]["critical_rate"] < rows["S2"]["critical_rate"] < rows["S3"]["critical_rate"]


def test_compare_scenarios_flags_inverted_ordering():
    cfg1, cfg3 = short_cfg("S1"), short_cfg("S3")
    entries = [
        ("S1", fake_curve("S1", 25.0), analytic_demand(cfg1)),
        ("S3", fake_curve("S3", 14.0), analytic_demand(cfg3)),
    ]
    assert not compare_scenarios(entries).ordering_consistent


def test_compare_scenarios_needs_two():
    with pytest.raises(ValueError):
        compare_scenarios([("S1", fake_curve("S1", 14.0), analytic_demand(short_cfg("S1")))])


def test_identical_specs_identical_columns():
    cfg = short_cfg("S2", window=240.0)
    d1, d2 = analytic_demand(cfg), analytic_demand(cfg)
    p1 = run_point(cfg, 2.0, replications=1)
    p2 = run_point(cfg, 2.0, replications=1)
    assert d1 == d2
    assert p1.mean_rt == p2.mean_rt
    assert p1.utilization == p2.utilization
