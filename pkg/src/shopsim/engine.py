"""One replication: the arrival source spawns session walks whose requests
traverse the server farm, with observers collecting the report.

A replication is fully determined by (resolved config, arrival rate, seed
tokens); distinct replications share no mutable state and may run in
parallel processes.
"""

from __future__ import annotations

import gc

from .behavior import SessionWalk, compile_transitions
from .config import ResolvedConfig
from .farm import ServerFarm
from .kernel import Simulator, StreamFamily, sample_exponential
from .metrics import MetricsCollector, RunSummary, ServerStats
from .workload import ArrivalProcess, draw_class

__all__ = ["SimulationRun", "run_single", "rate_key"]


def rate_key(rate: float) -> int:
    """Stable integer token for seeding; micro-rate resolution."""
    return int(round(rate * 1_000_000))


class SimulationRun:
    """Builds and executes a single replication."""

    def __init__(
        self,
        cfg: ResolvedConfig,
        rate: float | None = None,
        replication: int = 0,
        record_queue_series: bool = False,
        record_requests: bool = False,
    ) -> None:
        if rate is None:
            rate = cfg.rate
        if rate is None:
            raise ValueError("no arrival rate: set scenario.lambda or pass one explicitly")
        self.cfg = cfg
        self.rate = float(rate)
        self.replication = replication
        self.seed_tokens = (cfg.run.master_seed, rate_key(self.rate), replication)
        self._mean_gap = 1.0 / self.rate if self.rate > 0.0 else float("inf")

        self.sim = Simulator()
        self.streams = StreamFamily(*self.seed_tokens)
        self._arrival_stream = self.streams.stream("arrivals")
        self._class_stream = self.streams.stream("class")
        self._think_stream = self.streams.stream("think")
        self._transition_stream = self.streams.stream("transitions")

        self.collector = MetricsCollector(
            thinking_states=tuple(s.report_name for s in cfg.graph.thinking),
            emitting_states=tuple(s.report_name for s in cfg.graph.emitting),
            happiness_rule=cfg.run.happiness_rule,
            unit_value=cfg.run.unit_value,
            measure_start=cfg.run.warmup,
        )
        self.farm = ServerFarm(
            self.sim,
            cfg.servers,
            cfg.route_table(),
            cfg.wan,
            self.streams,
            observer=self._request_completed,
            record_hops=False,
        )
        self._server_order = tuple(cfg.servers)
        self._compiled = {
            name: compile_transitions(cfg.graph, cls, cfg.strict_cart)
            for name, cls in cfg.classes.items()
            if name in cfg.mix.classes
        }
        self._alive: set[SessionWalk] = set()
        self._started = 0
        self._next_session_id = 0
        self._warmup_measures = None

        self.request_log: list[tuple] | None = [] if record_requests else None
        self.queue_series: list[tuple] | None = [] if record_queue_series else None

    # -- wiring ---------------------------------------------------------------

    def _request_completed(self, req) -> None:
        self.collector.observe_request(req)
        if self.request_log is not None and req.completed_at >= self.cfg.run.warmup:
            self.request_log.append(
                (req.id, req.session_id, req.rtype, req.issued_at, req.completed_at, req.response_time)
            )

    def _schedule_next_arrival(self) -> None:
        gap = sample_exponential(self._arrival_stream, self._mean_gap)
        self.sim.schedule_after(gap, self._arrival)

    def _arrival(self) -> None:
        cls_name = draw_class(self.cfg.mix, self._class_stream)
        if self.sim.now >= self.cfg.run.warmup:
            self._started += 1
        sid = self._next_session_id
        self._next_session_id += 1
        walk = SessionWalk(
            self.sim,
            self.cfg.graph,
            self.cfg.classes[cls_name],
            self._think_stream,
            self._transition_stream,
            dispatch=lambda rtype, cb, sid=sid: self.farm.submit(rtype, sid, cb),
            on_finish=self._session_done,
            session_id=sid,
            strict_cart=self.cfg.strict_cart,
            max_transitions=self.cfg.run.max_transitions,
            sojourn_includes_response=self.cfg.run.sojourn_includes_response,
            compiled=self._compiled[cls_name],
        )
        self._alive.add(walk)
        walk.start()
        self._schedule_next_arrival()

    def _session_done(self, walk: SessionWalk) -> None:
        self._alive.discard(walk)
        self.collector.observe_session(walk.record)

    def _sample_queues(self) -> None:
        now = self.sim.now
        self.queue_series.append(
            (now,) + tuple(self.farm.resources[s].queue_length for s in self._server_order)
        )
        nxt = now + self.cfg.run.queue_sample_interval
        if nxt <= self.cfg.run.window:
            self.sim.schedule_at(nxt, self._sample_queues)

    def _take_warmup_measures(self) -> None:
        self._warmup_measures = {
            name: res.measure() for name, res in self.farm.resources.items()
        }
        self.collector.reset()

    # -- execution -------------------------------------------------------------

    def execute(self) -> RunSummary:
        run_cfg = self.cfg.run
        if self.rate > 0.0:
            self._schedule_next_arrival()
        if run_cfg.warmup > 0.0:
            self.sim.schedule_at(run_cfg.warmup, self._take_warmup_measures)
        if self.queue_series is not None:
            self.sim.schedule_at(0.0, self._sample_queues)

        # The event loop allocates heavily but acyclically; saturated runs keep
        # tens of thousands of open sessions alive, which makes generational GC
        # sweeps expensive for nothing.
        gc_was_enabled = gc.isenabled()
        gc.disable()
        try:
            self.sim.run(run_cfg.window)
        finally:
            if gc_was_enabled:
                gc.enable()

        for walk in list(self._alive):
            record = walk.cut_off(run_cfg.window)
            self.collector.observe_session(record)
        self._alive.clear()

        span = run_cfg.window - run_cfg.warmup
        server_stats = {}
        for name, res in self.farm.resources.items():
            end = res.measure(run_cfg.window)
            start = self._warmup_measures[name] if self._warmup_measures else None
            completions = end.completions - (start.completions if start else 0)
            busy = end.busy_time - (start.busy_time if start else 0.0)
            q_area = end.queue_integral - (start.queue_integral if start else 0.0)
            server_stats[name] = ServerStats(
                throughput=completions / span,
                utilization=busy / span,
                mean_queue_length=q_area / span,
            )

        report = self.collector.finalize_report(run_cfg.window, server_stats, self._started)
        return RunSummary(
            config_fingerprint=self.cfg.fingerprint(),
            seed_tokens=self.seed_tokens,
            window=run_cfg.window,
            report=report,
        )


def run_single(cfg: ResolvedConfig, rate: float | None = None, replication: int = 0) -> RunSummary:
    """Execute one replication and return its summary (planner worker entry)."""
    return SimulationRun(cfg, rate, replication).execute()
