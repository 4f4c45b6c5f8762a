"""Observers and report builder.

Request-level statistics (response times, happiness buckets), server-level
statistics (throughput, utilization, queue length), and the eleven
session-level metrics:

PM1  mean visits per state per session          PM7  ended empty-cart, no purchase
PM2  sojourn fraction per thinking state        PM8  mean requests per session
PM3  left after adding >= 1 item (no purchase)  PM9  sessions absorbed in-window
PM4  mean session length, think seconds         PM10 mean items paid per session
PM5  buy-to-visit ratio                         PM11 mean items abandoned per session
PM6  mean sojourn seconds per state

Session-level metrics are computed over sessions absorbed within the window;
sessions cut off by the window end count only against PM9. A customer's
happiness bucket comes from the mean (optionally max) response time over the
session's completed requests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .behavior import SessionRecord
from .farm import Request

__all__ = [
    "ResponseTimeStats",
    "BucketFractions",
    "ServerStats",
    "MetricsReport",
    "RunSummary",
    "MetricsCollector",
]

BUCKET_BOUNDS = (2.0, 4.0)


@dataclass
class ResponseTimeStats:
    count: int = 0
    mean: float = float("nan")
    p50: float = float("nan")
    p95: float = float("nan")
    p99: float = float("nan")

    @classmethod
    def from_samples(cls, samples: list[float]) -> "ResponseTimeStats":
        if not samples:
            return cls()
        arr = np.asarray(samples)
        p50, p95, p99 = np.percentile(arr, (50.0, 95.0, 99.0))
        return cls(len(samples), float(arr.mean()), float(p50), float(p95), float(p99))


@dataclass
class BucketFractions:
    """Share of customers by experienced response time."""

    lt2: float = 0.0
    between: float = 0.0
    gt4: float = 0.0


@dataclass
class ServerStats:
    throughput: float  # completions / s
    utilization: float  # busy fraction in [0, 1]
    mean_queue_length: float  # time-weighted jobs in system


@dataclass
class MetricsReport:
    window: float
    sessions_started: int
    sessions_completed: int
    sessions_cut_off: int
    response_overall: ResponseTimeStats
    response_by_type: dict[str, ResponseTimeStats]
    buckets: BucketFractions
    servers: dict[str, ServerStats]
    pm1_visits: dict[str, float]
    pm2_sojourn_fractions: dict[str, float]
    pm3_abandoned_with_items: float
    pm4_session_seconds: float
    pm5_buy_to_visit: float
    pm6_sojourn_seconds: dict[str, float]
    pm7_ended_empty: float
    pm8_requests_per_session: float
    pm9_completed_regularly: float
    pm10_items_paid: float
    pm11_items_abandoned: float
    revenue_throughput: float
    potential_loss_throughput: float
    degenerate: bool

    def to_dict(self) -> dict:
        def rts(s: ResponseTimeStats) -> dict:
            return {
                "count": s.count, "mean": _none_if_nan(s.mean), "p50": _none_if_nan(s.p50),
                "p95": _none_if_nan(s.p95), "p99": _none_if_nan(s.p99),
            }

        return {
            "window": self.window,
            "sessions": {
                "started": self.sessions_started,
                "completed": self.sessions_completed,
                "cut_off": self.sessions_cut_off,
            },
            "response_time": {
                "overall": rts(self.response_overall),
                "by_type": {t: rts(s) for t, s in sorted(self.response_by_type.items())},
            },
            "buckets": {
                "lt2": self.buckets.lt2,
                "between_2_and_4": self.buckets.between,
                "gt4": self.buckets.gt4,
            },
            "servers": {
                name: {
                    "throughput": s.throughput,
                    "utilization": s.utilization,
                    "mean_queue_length": s.mean_queue_length,
                }
                for name, s in sorted(self.servers.items())
            },
            "pm": {
                "pm1_visits": dict(sorted(self.pm1_visits.items())),
                "pm2_sojourn_fractions": dict(sorted(self.pm2_sojourn_fractions.items())),
                "pm3_abandoned_with_items": self.pm3_abandoned_with_items,
                "pm4_session_seconds": self.pm4_session_seconds,
                "pm5_buy_to_visit": self.pm5_buy_to_visit,
                "pm6_sojourn_seconds": dict(sorted(self.pm6_sojourn_seconds.items())),
                "pm7_ended_empty": self.pm7_ended_empty,
                "pm8_requests_per_session": self.pm8_requests_per_session,
                "pm9_completed_regularly": self.pm9_completed_regularly,
                "pm10_items_paid": self.pm10_items_paid,
                "pm11_items_abandoned": self.pm11_items_abandoned,
            },
            "revenue_throughput": self.revenue_throughput,
            "potential_loss_throughput": self.potential_loss_throughput,
            "degenerate": self.degenerate,
        }


def _none_if_nan(x: float):
    return None if x != x else x


@dataclass
class RunSummary:
    """One replication's outcome; reproducible from (config, seed)."""

    config_fingerprint: str
    seed_tokens: tuple[int, ...]
    window: float
    report: MetricsReport

    def to_dict(self) -> dict:
        return {
            "config_fingerprint": self.config_fingerprint,
            "seed_tokens": list(self.seed_tokens),
            "window": self.window,
            "report": self.report.to_dict(),
        }


class MetricsCollector:
    """Accumulates request and session observations for one replication."""

    def __init__(
        self,
        thinking_states: tuple[str, ...],
        emitting_states: tuple[str, ...],
        happiness_rule: str = "mean",
        unit_value: float = 1.0,
        measure_start: float = 0.0,
    ) -> None:
        if happiness_rule not in ("mean", "max"):
            raise ValueError(f"happiness_rule must be 'mean' or 'max', got {happiness_rule!r}")
        self.thinking_states = thinking_states
        self.emitting_states = emitting_states
        self.happiness_rule = happiness_rule
        self.unit_value = unit_value
        self.measure_start = measure_start
        self.reset()

    def reset(self) -> None:
        self._rts_by_type: dict[str, list[float]] = {}
        self.sessions_completed = 0
        self.sessions_cut_off = 0
        self._visit_sums: dict[str, float] = {}
        self._sojourn_sums: dict[str, float] = {}
        self._request_sum = 0
        self._items_added_sum = 0
        self._items_paid_sum = 0
        self._outcomes = {"paid": 0, "abandoned_with_items": 0, "abandoned_empty": 0}
        self._bucket_counts = [0, 0, 0]

    # -- observation ---------------------------------------------------------

    def observe_request(self, req: Request) -> None:
        if req.completed_at < self.measure_start:
            return
        self._rts_by_type.setdefault(req.rtype, []).append(req.response_time)

    def observe_session(self, rec: SessionRecord) -> None:
        if rec.start < self.measure_start:
            return
        if rec.outcome == "cut_off_by_window":
            self.sessions_cut_off += 1
            return
        self.sessions_completed += 1
        self._outcomes[rec.outcome] += 1
        for name, n in rec.visits.items():
            self._visit_sums[name] = self._visit_sums.get(name, 0.0) + n
        for name, t in rec.sojourn.items():
            self._sojourn_sums[name] = self._sojourn_sums.get(name, 0.0) + t
        self._request_sum += rec.request_count
        self._items_added_sum += rec.items_added
        self._items_paid_sum += rec.items_paid
        if rec.request_rts:
            if self.happiness_rule == "mean":
                experienced = sum(rec.request_rts) / len(rec.request_rts)
            else:
                experienced = max(rec.request_rts)
        else:
            experienced = 0.0
        if experienced < BUCKET_BOUNDS[0]:
            self._bucket_counts[0] += 1
        elif experienced <= BUCKET_BOUNDS[1]:
            self._bucket_counts[1] += 1
        else:
            self._bucket_counts[2] += 1

    # -- report --------------------------------------------------------------

    def finalize_report(
        self,
        window: float,
        servers: Mapping[str, ServerStats],
        sessions_started: int,
    ) -> MetricsReport:
        n = self.sessions_completed
        degenerate = n == 0
        all_rts: list[float] = []
        by_type = {}
        for rtype, rts in self._rts_by_type.items():
            all_rts.extend(rts)
            by_type[rtype] = ResponseTimeStats.from_samples(rts)

        if degenerate:
            pm1: dict[str, float] = {}
            pm6: dict[str, float] = {}
            pm2: dict[str, float] = {}
            pm3 = pm4 = pm5 = pm7 = pm8 = pm9 = pm10 = pm11 = float("nan")
            buckets = BucketFractions()
        else:
            pm1 = {name: s / n for name, s in self._visit_sums.items()}
            pm6 = {name: s / n for name, s in self._sojourn_sums.items()}
            pm4 = sum(pm6.get(name, 0.0) for name in self.thinking_states)
            pm2 = {
                name: (pm6.get(name, 0.0) / pm4 if pm4 > 0.0 else 0.0)
                for name in self.thinking_states
            }
            pm3 = self._outcomes["abandoned_with_items"] / n
            pm5 = self._outcomes["paid"] / n
            pm7 = self._outcomes["abandoned_empty"] / n
            pm8 = self._request_sum / n
            pm9 = n / sessions_started if sessions_started > 0 else float("nan")
            pm10 = self._items_paid_sum / n
            pm11 = (self._items_added_sum - self._items_paid_sum) / n
            buckets = BucketFractions(
                self._bucket_counts[0] / n,
                self._bucket_counts[1] / n,
                self._bucket_counts[2] / n,
            )

        effective_window = window - self.measure_start
        revenue = 0.0 if degenerate else self._items_paid_sum * self.unit_value / effective_window
        loss = (
            0.0
            if degenerate
            else (self._items_added_sum - self._items_paid_sum) * self.unit_value / effective_window
        )
        return MetricsReport(
            window=window,
            sessions_started=sessions_started,
            sessions_completed=n,
            sessions_cut_off=self.sessions_cut_off,
            response_overall=ResponseTimeStats.from_samples(all_rts),
            response_by_type=by_type,
            buckets=buckets,
            servers=dict(servers),
            pm1_visits=pm1,
            pm2_sojourn_fractions=pm2,
            pm3_abandoned_with_items=pm3,
            pm4_session_seconds=pm4,
            pm5_buy_to_visit=pm5,
            pm6_sojourn_seconds=pm6,
            pm7_ended_empty=pm7,
            pm8_requests_per_session=pm8,
            pm9_completed_regularly=pm9,
            pm10_items_paid=pm10,
            pm11_items_abandoned=pm11,
            revenue_throughput=revenue,
            potential_loss_throughput=loss,
            degenerate=degenerate,
        )
