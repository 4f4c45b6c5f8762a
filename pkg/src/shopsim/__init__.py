"""shopsim: discrete-event simulation of e-commerce shopping sessions against
a multi-tier server farm, for capacity planning.

Quick start::

    from shopsim import default_config, SimulationRun, run_sweep

    cfg = default_config("S1")
    summary = SimulationRun(cfg, rate=10.0).execute()
    print(summary.report.response_overall.mean)
"""

from .behavior import (
    CbmgEdge,
    CbmgGraph,
    CbmgState,
    CustomerClass,
    SessionRecord,
    SessionWalk,
    analytic_session_metrics,
    builtin_classes,
    default_graph,
    expected_visits,
    sample_transition,
    simulate_session,
    validate_graph,
)
from .config import (
    ConfigError,
    ResolvedConfig,
    SCENARIO_PRESETS,
    default_config,
    load_config,
    resolve_config,
    validate_config,
)
from .engine import SimulationRun, run_single
from .farm import (
    DEFAULT_ROUTES,
    DemandReport,
    Request,
    RouteTable,
    ServerFarm,
    ServerSpec,
    WanSpec,
    default_server_specs,
    service_demand,
)
from .kernel import (
    Event,
    FifoResource,
    RandomStream,
    SimulationError,
    Simulator,
    StreamFamily,
    sample_exponential,
    sample_truncated_normal,
)
from .metrics import MetricsCollector, MetricsReport, RunSummary
from .planner import (
    CriticalRate,
    PointSummary,
    SweepCurve,
    SweepSpec,
    analytic_demand,
    compare_scenarios,
    critical_lambda,
    run_point,
    run_sweep,
)
from .workload import ArrivalProcess, ScenarioMix, draw_class, next_interarrival, per_class_rates

__version__ = "0.1.0"
