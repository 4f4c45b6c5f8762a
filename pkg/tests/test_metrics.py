"""Metrics collection and the report's internal consistency laws."""

import numpy as np
import pytest

from shopsim.behavior import SessionRecord
from shopsim.metrics import MetricsCollector, ResponseTimeStats, ServerStats


class FakeRequest:
    def __init__(self, rtype, rt, completed_at=10.0):
        self.rtype = rtype
        self.response_time = rt
        self.completed_at = completed_at


def collector(**kwargs):
    return MetricsCollector(
        thinking_states=("Browse", "Search", "Checkout"),
        emitting_states=("Browse", "Search", "AddToCart", "Checkout"),
        **kwargs,
    )


def session(
    outcome="paid",
    rts=(1.0,),
    visits=None,
    sojourn=None,
    added=0,
    paid=0,
    start=0.0,
):
    record = SessionRecord("c", 0, start=start)
    record.outcome = outcome
    record.request_rts = list(rts)
    record.request_ids = list(range(len(rts)))
    record.visits = dict(visits or {"Browse": 1})
    record.sojourn = dict(sojourn or {"Browse": 60.0})
    record.items_added = added
    record.items_paid = paid
    return record


def finalize(c, window=100.0, started=None):
    started = started if started is not None else c.sessions_completed + c.sessions_cut_off
    return c.finalize_report(window, {"WS": ServerStats(1.0, 0.5, 2.0)}, started)


def test_single_request_mean():
    c = collector()
    c.observe_request(FakeRequest("Browse", 1.0))
    report = finalize(c)
    assert report.response_overall.mean == pytest.approx(1.0)
    assert report.response_overall.count == 1


def test_two_request_mean():
    c = collector()
    c.observe_request(FakeRequest("Browse", 1.0))
    c.observe_request(FakeRequest("Search", 3.0))
    report = finalize(c)
    assert report.response_overall.mean == pytest.approx(2.0)
    assert report.response_by_type["Browse"].count == 1


def test_percentiles_match_sorted_reference():
    rng = np.random.default_rng(9)
    samples = list(rng.gamma(2.0, 0.5, size=10_000))
    c = collector()
    for rt in samples:
        c.observe_request(FakeRequest("Browse", rt))
    report = finalize(c)

    def reference_percentile(values, q):
        ordered = sorted(values)
        pos = (len(ordered) - 1) * q
        lo = int(pos)
        hi = min(lo + 1, len(ordered) - 1)
        frac = pos - lo
        return ordered[lo] * (1 - frac) + ordered[hi] * frac

    assert report.response_overall.mean == pytest.approx(sum(samples) / len(samples))
    assert report.response_overall.p50 == pytest.approx(reference_percentile(samples, 0.50))
    assert report.response_overall.p95 == pytest.approx(reference_percentile(samples, 0.95))
    assert report.response_overall.p99 == pytest.approx(reference_percentile(samples, 0.99))


def test_happiness_buckets_by_mean_response_time():
    c = collector()
    c.observe_session(session(rts=(0.5, 1.0)))  # mean 0.75 -> lt2
    c.observe_session(session(rts=(1.0, 5.0)))  # mean 3.0  -> between
    c.observe_session(session(rts=(6.0,)))  # -> gt4
    report = finalize(c)
    assert report.buckets.lt2 == pytest.approx(1 / 3)
    assert report.buckets.between == pytest.approx(1 / 3)
    assert report.buckets.gt4 == pytest.approx(1 / 3)


def test_happiness_buckets_by_max_response_time():
    c = collector(happiness_rule="max")
    c.observe_session(session(rts=(1.0, 5.0)))  # max 5 -> gt4
    report = finalize(c)
    assert report.buckets.gt4 == pytest.approx(1.0)


def test_paid_session_with_two_items_accumulates_pm10():
    c = collector()
    c.observe_session(session(added=2, paid=2))
    c.observe_session(session(outcome="abandoned_with_items", added=1, paid=0))
    report = finalize(c)
    assert report.pm10_items_paid == pytest.approx(1.0)
    assert report.pm11_items_abandoned == pytest.approx(0.5)
    assert report.pm10_items_paid + report.pm11_items_abandoned == pytest.approx(1.5)


def test_cut_off_sessions_only_count_against_pm9():
    c = collector()
    c.observe_session(session())
    c.observe_session(session(outcome="cut_off_by_window"))
    report = finalize(c, started=2)
    assert report.sessions_completed == 1
    assert report.sessions_cut_off == 1
    assert report.pm9_completed_regularly == pytest.approx(0.5)
    assert report.pm1_visits["Browse"] == pytest.approx(1.0)  # cut session excluded


def test_outcome_partition_sums_to_one():
    c = collector()
    c.observe_session(session(outcome="paid", added=1, paid=1))
    c.observe_session(session(outcome="abandoned_with_items", added=2))
    c.observe_session(session(outcome="abandoned_empty"))
    report = finalize(c)
    total = (
        report.pm3_abandoned_with_items + report.pm5_buy_to_visit + report.pm7_ended_empty
    )
    assert total == pytest.approx(1.0, abs=1e-12)


def test_pm4_equals_sum_of_thinking_pm6():
    c = collector()
    c.observe_session(session(sojourn={"Browse": 30.0, "Search": 45.0}))
    c.observe_session(session(sojourn={"Browse": 60.0, "Checkout": 200.0}))
    report = finalize(c)
    assert report.pm4_session_seconds == pytest.approx(
        sum(report.pm6_sojourn_seconds.get(s, 0.0) for s in ("Browse", "Search", "Checkout")),
        abs=1e-9,
    )
    assert sum(report.pm2_sojourn_fractions.values()) == pytest.approx(1.0, abs=1e-9)


def test_revenue_throughput_scales_with_unit_value():
    paid = collector(unit_value=2.5)
    paid.observe_session(session(added=2, paid=2))
    report = finalize(paid, window=50.0)
    assert report.revenue_throughput == pytest.approx(2 * 2.5 / 50.0)
    assert report.potential_loss_throughput == 0.0

    free = collector(unit_value=0.0)
    free.observe_session(session(added=2, paid=2))
    assert finalize(free).revenue_throughput == 0.0


def test_zero_completed_sessions_flags_degenerate():
    c = collector()
    report = finalize(c, started=0)
    assert report.degenerate
    assert report.pm4_session_seconds != report.pm4_session_seconds  # NaN


def test_warmup_fence_drops_early_observations():
    c = collector(measure_start=50.0)
    c.observe_request(FakeRequest("Browse", 1.0, completed_at=10.0))
    c.observe_session(session(start=5.0))
    c.observe_session(session(start=75.0))
    report = finalize(c, started=1)
    assert report.response_overall.count == 0
    assert report.sessions_completed == 1


def test_response_time_stats_empty():
    stats = ResponseTimeStats.from_samples([])
    assert stats.count == 0
    assert stats.mean != stats.mean
