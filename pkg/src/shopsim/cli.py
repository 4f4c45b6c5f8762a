"""Command-line front end.

Subcommands:

* ``validate`` -- schema and model diagnostics for a config file.
* ``run``      -- single-point run; writes ``summary.json``, ``requests.csv``
  and ``queue_series.csv`` to the output directory.
* ``sweep``    -- arrival-rate sweep; writes ``curve.csv`` and
  ``sweep_summary.json`` (including the critical rate).
* ``oracle``   -- analytic session metrics, service demands, bottleneck and
  saturation rate; no simulation executed.

Common flags: ``--config PATH``, ``--out DIR``, ``--seed N``,
``--replications N``, ``--workers N``. Without ``--config`` the shipped
defaults apply (scenario via ``--scenario``). The default output directory is
``$SHOPSIM_OUT`` or ``./shopsim-out``.

Exit codes: 0 success, 2 configuration error, 3 runtime error. Outputs are
byte-identical across invocations for a fixed config and master seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import targets
from .behavior import analytic_session_metrics, expected_requests_by_type
from .config import (
    SCENARIO_PRESETS,
    ConfigError,
    ResolvedConfig,
    default_config,
    load_config,
)
from .engine import SimulationRun
from .kernel import SimulationError
from .planner import SweepSpec, analytic_demand, critical_lambda, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"configuration OK (fingerprint {cfg.fingerprint()})")
        return EXIT_OK
    try:
        if args.command == "run":
            return _cmd_run(cfg, args)
        if args.command == "sweep":
            return _cmd_sweep(cfg, args)
        if args.command == "oracle":
            return _cmd_oracle(cfg, args)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, OSError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    parser.error(f"unknown command {args.command!r}")
    return EXIT_RUNTIME


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shopsim",
        description="Discrete-event storefront simulator for capacity planning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("validate", "check a config file and report violations"),
        ("run", "single-point run with request log and queue series"),
        ("sweep", "arrival-rate sweep with critical-rate estimation"),
        ("oracle", "analytic metrics and bottleneck report (no simulation)"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="YAML config file (defaults apply if omitted)")
        p.add_argument("--scenario", choices=sorted(SCENARIO_PRESETS), help="preset scenario override")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--replications", type=int, help="replications per point override")
        p.add_argument("--out", type=Path, help="output directory (default $SHOPSIM_OUT or ./shopsim-out)")
        if name in ("run", "sweep"):
            p.add_argument("--workers", type=int, default=None, help="worker processes (default: CPU count)")
        if name == "run":
            p.add_argument("--lambda", dest="rate", type=float, help="arrival rate override")
    return parser


def _load(args) -> ResolvedConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = default_config(args.scenario or "S1")
    if args.config is not None and args.scenario:
        from dataclasses import replace

        from .workload import ScenarioMix

        cfg = replace(
            cfg,
            mix=ScenarioMix.from_mapping(SCENARIO_PRESETS[args.scenario]),
            scenario_name=args.scenario,
        )
    if args.seed is not None:
        cfg = cfg.with_run(master_seed=args.seed)
    if args.replications is not None:
        cfg = cfg.with_run(replications=args.replications)
    return cfg


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get("SHOPSIM_OUT", "shopsim-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return ""
        return repr(x)
    return str(x)


def _sanitize(obj):
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_sanitize(payload), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_run(cfg: ResolvedConfig, args) -> int:
    rate = args.rate if getattr(args, "rate", None) is not None else cfg.rate
    if rate is None:
        raise ConfigError("run needs an arrival rate: set scenario.lambda or pass --lambda")
    out = _out_dir(args)
    sim_run = SimulationRun(cfg, rate, record_queue_series=True, record_requests=True)
    summary = sim_run.execute()

    payload = summary.to_dict()
    payload["rate"] = rate
    payload["scenario"] = cfg.scenario_name
    payload["config"] = cfg.to_canonical_dict()
    _write_json(out / "summary.json", payload)
    _write_csv(
        out / "requests.csv",
        ["id", "session_id", "type", "issued_at", "completed_at", "response_time"],
        sim_run.request_log,
    )
    servers = list(cfg.servers)
    _write_csv(
        out / "queue_series.csv",
        ["time"] + [f"qlen_{s}" for s in servers],
        sim_run.queue_series,
    )
    report = summary.report
    flag = " (degenerate)" if report.degenerate else ""
    print(f"run: rate={rate:g}/s window={cfg.run.window:g}s{flag}")
    print(
        f"  sessions started={report.sessions_started}"
        f" completed={report.sessions_completed} cut_off={report.sessions_cut_off}"
    )
    if not report.degenerate:
        print(
            f"  mean RT={report.response_overall.mean:.4f}s"
            f" p95={report.response_overall.p95:.4f}s"
            f" unhappy(>4s)={report.buckets.gt4:.2%}"
        )
    print(f"  wrote {out / 'summary.json'}, requests.csv, queue_series.csv")
    return EXIT_OK


_CURVE_PM_COLS = (
    "pm4_session_seconds",
    "pm5_buy_to_visit",
    "pm8_requests_per_session",
    "pm9_completed_regularly",
    "pm10_items_paid",
    "pm11_items_abandoned",
)


def _cmd_sweep(cfg: ResolvedConfig, args) -> int:
    out = _out_dir(args)
    spec = SweepSpec.from_config(cfg)
    servers = list(cfg.servers)

    def progress(rate: float, point) -> None:
        rt = "-" if point.degenerate else f"{point.mean_rt:.3f}s"
        print(f"  rate {rate:g}: mean RT {rt}", flush=True)

    print(
        f"sweep: scenario={cfg.scenario_name or 'custom'} "
        f"rates [{spec.lambda_from:g}, {spec.lambda_to:g}] step {spec.lambda_step:g}, "
        f"{spec.replications} replications"
    )
    curve = run_sweep(cfg, spec, workers=args.workers, progress=progress)

    header = (
        ["lambda", "mean_rt", "ci", "bucket_lt2", "bucket_2to4", "bucket_gt4"]
        + [f"util_{s}" for s in servers]
        + [f"thr_{s}" for s in servers]
        + list(_CURVE_PM_COLS)
    )
    rows = []
    for p in curve.points:
        rows.append(
            [p.rate, p.mean_rt, p.rt_ci_half, p.buckets.lt2, p.buckets.between, p.buckets.gt4]
            + [p.utilization[s] for s in servers]
            + [p.throughput[s] for s in servers]
            + [p.pm.get(c) for c in _CURVE_PM_COLS]
        )
    _write_csv(out / "curve.csv", header, rows)

    demand = analytic_demand(cfg)
    payload = {
        "scenario": cfg.scenario_name,
        "config_fingerprint": cfg.fingerprint(),
        "threshold": spec.threshold,
        "critical_lambda": curve.critical.to_dict(),
        "demands": demand.demands,
        "bottleneck": demand.bottleneck,
        "saturation_rate": demand.saturation_rate,
        "reference_critical_lambda": targets.REFERENCE_CRITICAL_RATES.get(cfg.scenario_name),
    }
    _write_json(out / "sweep_summary.json", payload)
    crit = curve.critical
    if crit.status == "crossed":
        print(f"critical rate: {crit.rate:.3f}/s at threshold {spec.threshold:g}s")
    else:
        print(f"critical rate: {crit.status}")
    print(f"  wrote {out / 'curve.csv'}, sweep_summary.json")
    return EXIT_OK


def _cmd_oracle(cfg: ResolvedConfig, args) -> int:
    analytic = analytic_session_metrics(cfg.graph, cfg.classes, cfg.mix, cfg.strict_cart)
    demand = analytic_demand(cfg)
    scenario = cfg.scenario_name or "custom"
    print(f"analytic report: scenario={scenario} strict_cart={cfg.strict_cart}")
    print("  per class (visits per session):")
    for name, _w in cfg.mix.items():
        sol = analytic.per_class[name]
        visits = " ".join(
            f"{state}={sol.visits[state]:.5f}"
            for state in ("Browse", "Search", "AddToCart", "Checkout")
            if state in sol.visits
        )
        print(f"    {name:10s} {visits} pay={sol.purchase_probability:.5f}")
    print("  mix-weighted:")
    for state in sorted(analytic.pm1_visits):
        print(f"    PM1[{state}] = {analytic.pm1_visits[state]:.5f}")
    for state in sorted(analytic.pm2_sojourn_fractions):
        print(f"    PM2[{state}] = {analytic.pm2_sojourn_fractions[state]:.5f}")
    print(f"    PM4 = {analytic.pm4_session_seconds:.2f} s")
    print(f"    PM5 = {analytic.pm5_buy_to_visit:.5f}")
    pm8 = _analytic_pm8(cfg)
    print(f"    PM8 = {pm8:.5f} requests/session")
    print("  service demands (s/session):")
    for server, d in demand.demands.items():
        marker = "  <- bottleneck" if server == demand.bottleneck else ""
        print(f"    {server:4s} {d:.6f}{marker}")
    print(f"  saturation rate 1/D({demand.bottleneck}) = {demand.saturation_rate:.3f}/s")

    model_values = {
        "pm1": analytic.pm1_visits,
        "pm2": analytic.pm2_sojourn_fractions,
        "pm4": analytic.pm4_session_seconds,
        "pm5": analytic.pm5_buy_to_visit,
        "pm8": pm8,
    }
    rows = targets.comparison_rows(scenario, model_values)
    if rows:
        print("  reference deltas (diagnostic only):")
        for row in rows:
            print(
                f"    {row['metric']:16s} reference={row['reference']:<10.5g}"
                f" model={row['model']:<10.5g} delta={row['delta_pct']:+.1f}%"
            )
    if args.out is not None:
        out = _out_dir(args)
        _write_json(
            out / "oracle.json",
            {
                "scenario": scenario,
                "pm1": analytic.pm1_visits,
                "pm2": analytic.pm2_sojourn_fractions,
                "pm4": analytic.pm4_session_seconds,
                "pm5": analytic.pm5_buy_to_visit,
                "pm8": pm8,
                "demands": demand.demands,
                "bottleneck": demand.bottleneck,
                "saturation_rate": demand.saturation_rate,
                "reference_deltas": rows,
            },
        )
        print(f"  wrote {out / 'oracle.json'}")
    return EXIT_OK


def _analytic_pm8(cfg: ResolvedConfig) -> float:
    total = 0.0
    for name, weight in cfg.mix.items():
        per_type = expected_requests_by_type(cfg.graph, cfg.classes[name], cfg.strict_cart)
        total += weight * sum(per_type.values())
    return total


if __name__ == "__main__":
    sys.exit(main())
