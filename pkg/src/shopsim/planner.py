"""Sweep orchestration: replicated runs over an arrival-rate grid, critical
rate estimation by linear interpolation at the response-time threshold, and
scenario comparison backed by the utilization law.

Replications are independent (each derives its seeds from (master seed, rate,
replication index)), so points run in parallel worker processes and are joined
in a deterministic order (sorted by rate, then replication).
"""

from __future__ import annotations

import math
import multiprocessing
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from scipy import stats as _stats

from .behavior import analytic_session_metrics, expected_requests_by_type
from .config import ResolvedConfig
from .engine import run_single
from .farm import DemandReport, service_demand
from .metrics import BucketFractions, RunSummary

__all__ = [
    "SweepSpec",
    "PointSummary",
    "SweepCurve",
    "CriticalRate",
    "ScenarioComparison",
    "run_point",
    "run_sweep",
    "critical_lambda",
    "compare_scenarios",
    "analytic_demand",
]


@dataclass(frozen=True)
class SweepSpec:
    """Arrival-rate grid and replication plan."""

    lambda_from: float = 0.0
    lambda_to: float = 30.0
    lambda_step: float = 0.5
    replications: int = 5
    threshold: float = 4.0

    def __post_init__(self):
        if self.lambda_from > self.lambda_to:
            raise ValueError("lambda_from must not exceed lambda_to")
        if self.lambda_step <= 0.0:
            raise ValueError("lambda_step must be positive")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")

    @classmethod
    def from_config(cls, cfg: ResolvedConfig) -> "SweepSpec":
        return cls(
            lambda_from=cfg.sweep.lambda_from,
            lambda_to=cfg.sweep.lambda_to,
            lambda_step=cfg.sweep.lambda_step,
            replications=cfg.run.replications,
            threshold=cfg.run.threshold,
        )

    def rates(self) -> list[float]:
        n = int(math.floor((self.lambda_to - self.lambda_from) / self.lambda_step + 1e-9))
        return [round(self.lambda_from + i * self.lambda_step, 9) for i in range(n + 1)]


@dataclass
class PointSummary:
    """Aggregate of the replications at one arrival rate."""

    rate: float
    replications: int
    degenerate: bool
    mean_rt: float
    rt_ci_half: float
    rep_mean_rts: list[float]
    buckets: BucketFractions
    utilization: dict[str, float]
    throughput: dict[str, float]
    mean_queue_length: dict[str, float]
    pm: dict[str, float]
    sessions_started: float
    sessions_completed: float


@dataclass
class CriticalRate:
    """Where the mean response time crosses the threshold."""

    status: str  # 'crossed' | 'not_crossed' | 'below_range'
    rate: float | None = None
    multiple_crossings: bool = False

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "rate": self.rate,
            "multiple_crossings": self.multiple_crossings,
        }


@dataclass
class SweepCurve:
    scenario: str | None
    threshold: float
    points: list[PointSummary] = field(default_factory=list)
    critical: CriticalRate | None = None


# ---------------------------------------------------------------------------
# Execution


def _replication_task(args) -> tuple[float, int, RunSummary]:
    cfg, rate, rep = args
    return rate, rep, run_single(cfg, rate, rep)


def _aggregate_point(rate: float, summaries: Sequence[RunSummary]) -> PointSummary:
    reports = [s.report for s in summaries]
    live = [r for r in reports if not r.degenerate]
    rep_means = [r.response_overall.mean for r in live if r.response_overall.count > 0]
    degenerate = not rep_means
    if degenerate:
        mean_rt = float("nan")
        ci = float("nan")
    else:
        n = len(rep_means)
        mean_rt = sum(rep_means) / n
        if n > 1:
            var = sum((x - mean_rt) ** 2 for x in rep_means) / (n - 1)
            ci = float(_stats.t.ppf(0.975, n - 1)) * math.sqrt(var / n)
        else:
            ci = float("nan")

    def avg(values: Iterable[float]) -> float:
        vals = list(values)
        return sum(vals) / len(vals) if vals else float("nan")

    servers = reports[0].servers.keys()
    buckets = BucketFractions(
        lt2=avg(r.buckets.lt2 for r in live) if live else float("nan"),
        between=avg(r.buckets.between for r in live) if live else float("nan"),
        gt4=avg(r.buckets.gt4 for r in live) if live else float("nan"),
    )
    pm = {}
    if live:
        pm = {
            "pm4_session_seconds": avg(r.pm4_session_seconds for r in live),
            "pm5_buy_to_visit": avg(r.pm5_buy_to_visit for r in live),
            "pm8_requests_per_session": avg(r.pm8_requests_per_session for r in live),
            "pm9_completed_regularly": avg(r.pm9_completed_regularly for r in live),
            "pm10_items_paid": avg(r.pm10_items_paid for r in live),
            "pm11_items_abandoned": avg(r.pm11_items_abandoned for r in live),
        }
    return PointSummary(
        rate=rate,
        replications=len(summaries),
        degenerate=degenerate,
        mean_rt=mean_rt,
        rt_ci_half=ci,
        rep_mean_rts=rep_means,
        buckets=buckets,
        utilization={s: avg(r.servers[s].utilization for r in reports) for s in servers},
        throughput={s: avg(r.servers[s].throughput for r in reports) for s in servers},
        mean_queue_length={
            s: avg(r.servers[s].mean_queue_length for r in reports) for s in servers
        },
        pm=pm,
        sessions_started=avg(r.sessions_started for r in reports),
        sessions_completed=avg(r.sessions_completed for r in reports),
    )


def run_point(
    cfg: ResolvedConfig,
    rate: float,
    replications: int | None = None,
    workers: int = 1,
) -> PointSummary:
    """Run independent replications at one rate and aggregate them."""
    reps = cfg.run.replications if replications is None else replications
    tasks = [(cfg, rate, rep) for rep in range(reps)]
    results = _run_tasks(tasks, workers)
    summaries = [summary for _, _, summary in sorted(results, key=lambda r: (r[0], r[1]))]
    return _aggregate_point(rate, summaries)


def _run_tasks(tasks, workers: int | None) -> list[tuple[float, int, RunSummary]]:
    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, len(tasks)))
    if workers == 1:
        return [_replication_task(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(workers) as pool:
        return pool.map(_replication_task, tasks, chunksize=1)


def run_sweep(
    cfg: ResolvedConfig,
    spec: SweepSpec | None = None,
    workers: int | None = 1,
    progress: Callable[[float, PointSummary], None] | None = None,
) -> SweepCurve:
    """One aggregated point per rate on the grid, plus the critical rate."""
    if spec is None:
        spec = SweepSpec.from_config(cfg)
    rates = spec.rates()
    tasks = [(cfg, rate, rep) for rate in rates for rep in range(spec.replications)]
    results = _run_tasks(tasks, workers)
    by_rate: dict[float, list[tuple[int, RunSummary]]] = {r: [] for r in rates}
    for rate, rep, summary in results:
        by_rate[rate].append((rep, summary))
    curve = SweepCurve(scenario=cfg.scenario_name, threshold=spec.threshold)
    for rate in rates:
        summaries = [s for _, s in sorted(by_rate[rate], key=lambda x: x[0])]
        point = _aggregate_point(rate, summaries)
        curve.points.append(point)
        if progress is not None:
            progress(rate, point)
    curve.critical = critical_lambda(curve, spec.threshold)
    return curve


# ---------------------------------------------------------------------------
# Critical rate and comparison


def critical_lambda(curve, threshold: float) -> CriticalRate:
    """First threshold crossing by linear interpolation between grid points.

    Degenerate points (no completed requests) are skipped. When noise makes
    the curve cross several times, the first bracketing pair wins and the
    result is flagged.
    """
    points = curve.points if isinstance(curve, SweepCurve) else list(curve)
    usable: list[tuple[float, float]] = []
    for p in points:
        rate, rt = (p.rate, p.mean_rt) if isinstance(p, PointSummary) else (p[0], p[1])
        if rt == rt:  # not NaN
            usable.append((rate, rt))
    if not usable:
        raise ValueError("critical_lambda needs at least one non-degenerate point")
    usable.sort(key=lambda x: x[0])
    if usable[0][1] > threshold:
        return CriticalRate("below_range")
    crossings = []
    for (ra, rta), (rb, rtb) in zip(usable, usable[1:]):
        if rta <= threshold < rtb:
            crossings.append(ra + (threshold - rta) * (rb - ra) / (rtb - rta))
    if not crossings:
        return CriticalRate("not_crossed")
    return CriticalRate("crossed", rate=crossings[0], multiple_crossings=len(crossings) > 1)


def analytic_demand(cfg: ResolvedConfig) -> DemandReport:
    """Utilization-law demands for the configured mix (no simulation)."""
    by_type: dict[str, float] = {}
    for name, weight in cfg.mix.items():
        for rtype, count in expected_requests_by_type(
            cfg.graph, cfg.classes[name], cfg.strict_cart
        ).items():
            by_type[rtype] = by_type.get(rtype, 0.0) + weight * count
    return service_demand(cfg.route_table(), cfg.servers, by_type)


@dataclass
class ScenarioComparison:
    """Side-by-side sweep outcomes, ranked against the demand law."""

    rows: list[dict]
    ordering_consistent: bool  # higher total demand <=> lower critical rate

    def to_dict(self) -> dict:
        return {"rows": self.rows, "ordering_consistent": self.ordering_consistent}


def compare_scenarios(
    entries: Sequence[tuple[str, SweepCurve, DemandReport]],
) -> ScenarioComparison:
    if len(entries) < 2:
        raise ValueError("compare_scenarios needs at least two sweeps")
    rows = []
    for name, curve, demand in entries:
        crit = curve.critical or critical_lambda(curve, curve.threshold)
        rows.append(
            {
                "scenario": name,
                "critical_rate": crit.rate,
                "critical_status": crit.status,
                "bottleneck": demand.bottleneck,
                "bottleneck_demand": demand.demands[demand.bottleneck],
                "total_demand": sum(demand.demands.values()),
                "saturation_rate": demand.saturation_rate,
            }
        )
    ranked_by_demand = sorted(rows, key=lambda r: -r["total_demand"])
    crit_rates = [r["critical_rate"] for r in ranked_by_demand]
    known = [c for c in crit_rates if c is not None]
    ordering = all(a < b for a, b in zip(known, known[1:])) and len(known) == len(crit_rates)
    return ScenarioComparison(rows=rows, ordering_consistent=ordering)
