"""Configuration: one structured YAML file resolving to a full model.

Every omitted section falls back to the shipped defaults: the three built-in
shopper profiles, the default session graph, the five-server farm with its
routes and WAN parameters, and the standard run/sweep settings. All times are
seconds.

Top-level sections (all optional):

* ``scenario`` -- a preset name (``S1``/``S2``/``S3``) or ``{mix: {class:
  weight, ...}, lambda: rate}``.
* ``classes`` -- shopper profiles; complements (Search = 1 - Browse, ...) are
  filled in automatically.
* ``graph`` -- ``{not_found_target: exit|group3}`` or a full custom graph
  (``states``/``edges``/``entry``).
* ``farm`` -- ``servers`` (mean/sigma seconds), ``routes``, ``fes_enabled``,
  ``wan`` (or ``null`` for no WAN delay).
* ``run`` -- window, seed, replications, threshold, warmup, flags
  (``allow_empty_checkout``, ``happiness_rule``, ``unit_value``).
* ``sweep`` -- ``from``/``to``/``step`` arrival-rate grid.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from . import behavior, farm as farm_mod
from .behavior import CbmgEdge, CbmgGraph, CbmgState, CustomerClass
from .farm import RouteTable, ServerSpec, WanSpec
from .workload import ScenarioMix, WorkloadError

__all__ = [
    "ConfigError",
    "RunSettings",
    "SweepSettings",
    "ResolvedConfig",
    "SCENARIO_PRESETS",
    "default_config",
    "load_config",
    "resolve_config",
    "validate_config",
]

SCENARIO_PRESETS = {
    "S1": {"rare": 0.10, "ordinary": 0.30, "frequent": 0.60},
    "S2": {"rare": 0.33, "ordinary": 0.34, "frequent": 0.33},
    "S3": {"rare": 0.50, "ordinary": 0.30, "frequent": 0.20},
}

_COMPLEMENTS = (("Browse", "Search"), ("Found", "NotFound"), ("Add", "NotAdd"))
_DECISION_GROUPS = tuple(
    (f"Continue{k}", f"Checkout{k}", f"End{k}") for k in (1, 2, 3)
)


class ConfigError(Exception):
    """Raised for unreadable, ill-formed, or inconsistent configuration."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class RunSettings:
    window: float = 7200.0
    warmup: float = 0.0
    master_seed: int = 987653
    replications: int = 5
    threshold: float = 4.0
    allow_empty_checkout: bool = False
    happiness_rule: str = "mean"
    unit_value: float = 1.0
    max_transitions: int = 10_000
    queue_sample_interval: float = 1.0
    sojourn_includes_response: bool = False


@dataclass(frozen=True)
class SweepSettings:
    lambda_from: float = 0.0
    lambda_to: float = 30.0
    lambda_step: float = 0.5


@dataclass
class ResolvedConfig:
    """A fully-resolved model, ready to run."""

    classes: dict[str, CustomerClass]
    graph: CbmgGraph
    graph_spec: dict
    mix: ScenarioMix
    rate: float | None
    scenario_name: str | None
    servers: dict[str, ServerSpec]
    routes: dict[str, tuple[str, ...]]
    fes_enabled: bool
    wan: WanSpec | None
    run: RunSettings = field(default_factory=RunSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)

    @property
    def strict_cart(self) -> bool:
        return not self.run.allow_empty_checkout

    def route_table(self) -> RouteTable:
        return RouteTable(self.routes, self.servers, self.fes_enabled)

    def with_rate(self, rate: float) -> "ResolvedConfig":
        return replace(self, rate=rate)

    def with_run(self, **kwargs) -> "ResolvedConfig":
        return replace(self, run=replace(self.run, **kwargs))

    def to_canonical_dict(self) -> dict:
        return {
            "classes": {
                name: {
                    "probs": dict(sorted(c.probs.items())),
                    "think_means": dict(sorted(c.think_means.items())),
                }
                for name, c in sorted(self.classes.items())
            },
            "graph": self.graph_spec,
            "scenario": {
                "name": self.scenario_name,
                "mix": {name: p for name, p in self.mix.items()},
                "lambda": self.rate,
            },
            "farm": {
                "servers": {
                    name: {"mean": s.mean_service, "sigma": s.effective_sigma}
                    for name, s in sorted(self.servers.items())
                },
                "routes": {t: list(seq) for t, seq in sorted(self.routes.items())},
                "fes_enabled": self.fes_enabled,
                "wan": None if self.wan is None else {"mean": self.wan.mean, "sigma": self.wan.sigma},
            },
            "run": {
                "window": self.run.window,
                "warmup": self.run.warmup,
                "master_seed": self.run.master_seed,
                "replications": self.run.replications,
                "threshold": self.run.threshold,
                "allow_empty_checkout": self.run.allow_empty_checkout,
                "happiness_rule": self.run.happiness_rule,
                "unit_value": self.run.unit_value,
                "max_transitions": self.run.max_transitions,
                "sojourn_includes_response": self.run.sojourn_includes_response,
            },
            "sweep": {
                "from": self.sweep.lambda_from,
                "to": self.sweep.lambda_to,
                "step": self.sweep.lambda_step,
            },
        }

    def fingerprint(self) -> str:
        canon = json.dumps(self.to_canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Resolution


def default_config(scenario: str = "S1", rate: float | None = None) -> ResolvedConfig:
    return resolve_config({"scenario": scenario} if rate is None else {
        "scenario": {"mix": SCENARIO_PRESETS[scenario], "lambda": rate},
    })


def load_config(path) -> ResolvedConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"ill-formed YAML in {path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    return resolve_config(raw)


def resolve_config(raw: dict) -> ResolvedConfig:
    violations: list[str] = []
    known = {"classes", "graph", "scenario", "farm", "run", "sweep"}
    for key in raw:
        if key not in known:
            violations.append(f"unknown top-level section {key!r}")

    classes = _resolve_classes(raw.get("classes"), violations)
    graph, graph_spec = _resolve_graph(raw.get("graph"), violations)
    mix, rate, scenario_name = _resolve_scenario(raw.get("scenario"), classes, violations)
    servers, routes, fes_enabled, wan = _resolve_farm(raw.get("farm"), violations)
    run = _resolve_run(raw.get("run"), violations)
    sweep = _resolve_sweep(raw.get("sweep"), violations)

    if violations:
        raise ConfigError(violations)

    cfg = ResolvedConfig(
        classes=classes,
        graph=graph,
        graph_spec=graph_spec,
        mix=mix,
        rate=rate,
        scenario_name=scenario_name,
        servers=servers,
        routes=routes,
        fes_enabled=fes_enabled,
        wan=wan,
        run=run,
        sweep=sweep,
    )
    deep = validate_config(cfg)
    if deep:
        raise ConfigError(deep)
    return cfg


def validate_config(cfg: ResolvedConfig) -> list[str]:
    """Cross-section diagnostics: graph/class pairing, routes, request types."""
    violations: list[str] = []
    for name in cfg.mix.classes:
        if name not in cfg.classes:
            violations.append(f"scenario mix references unknown class {name!r}")
    try:
        table = cfg.route_table()
    except farm_mod.FarmError as exc:
        violations.append(str(exc))
        table = None
    if table is not None:
        for state in cfg.graph.emitting:
            if state.emits not in table.request_types:
                violations.append(
                    f"state {state.name!r} emits {state.emits!r} which has no route"
                )
    for name, cls in cfg.classes.items():
        if name not in cfg.mix.classes:
            continue  # unused classes may be partial
        violations.extend(behavior.validate_graph(cfg.graph, cls, cfg.strict_cart))
    if cfg.run.window <= 0:
        violations.append("run.window must be positive")
    if not 0 <= cfg.run.warmup < cfg.run.window:
        violations.append("run.warmup must lie in [0, window)")
    if cfg.run.replications < 1:
        violations.append("run.replications must be >= 1")
    if cfg.sweep.lambda_step <= 0:
        violations.append("sweep.step must be positive")
    if cfg.sweep.lambda_from > cfg.sweep.lambda_to:
        violations.append("sweep.from must not exceed sweep.to")
    if cfg.rate is not None and cfg.rate < 0:
        violations.append("scenario.lambda must be >= 0")
    return violations


# -- section resolvers -------------------------------------------------------


def _fill_complements(probs: dict[str, float], cls_name: str, violations: list[str]) -> None:
    for a, b in _COMPLEMENTS:
        if a in probs and b not in probs:
            probs[b] = 1.0 - probs[a]
        elif b in probs and a not in probs:
            probs[a] = 1.0 - probs[b]
    for group in _DECISION_GROUPS:
        present = [g for g in group if g in probs]
        if len(present) == len(group) - 1:
            missing = next(g for g in group if g not in probs)
            probs[missing] = 1.0 - sum(probs[g] for g in present)
        elif 0 < len(present) < len(group) - 1:
            violations.append(
                f"class {cls_name!r}: decision group {'/'.join(group)} is only partially specified"
            )


def _resolve_classes(section, violations) -> dict[str, CustomerClass]:
    classes = behavior.builtin_classes()
    if section is None:
        return classes
    if not isinstance(section, dict):
        violations.append("classes section must be a mapping")
        return classes
    for name, body in section.items():
        if not isinstance(body, dict):
            violations.append(f"class {name!r} must be a mapping")
            continue
        probs = {k: float(v) for k, v in (body.get("probs") or {}).items()}
        _fill_complements(probs, name, violations)
        think = {k: float(v) for k, v in (body.get("think_means") or behavior.DEFAULT_THINK_MEANS).items()}
        classes[name] = CustomerClass(name, probs, think)
    return classes


def _resolve_graph(section, violations) -> tuple[CbmgGraph, dict]:
    if section is None:
        section = {}
    if not isinstance(section, dict):
        violations.append("graph section must be a mapping")
        section = {}
    if "states" in section or "edges" in section:
        try:
            graph = _graph_from_spec(section)
        except (behavior.BehaviorError, KeyError, TypeError) as exc:
            violations.append(f"graph: {exc}")
            graph = behavior.default_graph()
            section = {"not_found_target": "exit"}
        return graph, _graph_spec_dict(graph)
    target = section.get("not_found_target", "exit")
    try:
        graph = behavior.default_graph(target)
    except behavior.BehaviorError as exc:
        violations.append(str(exc))
        graph = behavior.default_graph()
    return graph, _graph_spec_dict(graph)


def _graph_from_spec(section: dict) -> CbmgGraph:
    states = [
        CbmgState(
            name=s["name"],
            kind=s["kind"],
            emits=s.get("emits"),
            adds_item=bool(s.get("adds_item", False)),
            pays_cart=bool(s.get("pays_cart", False)),
            decision_group=s.get("decision_group"),
            reports_as=s.get("reports_as"),
            purchase=bool(s.get("purchase", False)),
        )
        for s in section["states"]
    ]
    edges = [
        CbmgEdge(
            source=e["from"],
            target=e["to"],
            prob_labels=tuple(e.get("labels", ())),
            needs_items=bool(e.get("needs_items", False)),
        )
        for e in section["edges"]
    ]
    return CbmgGraph(states, edges, entry=section.get("entry", "Entry"))


def _graph_spec_dict(graph: CbmgGraph) -> dict:
    return {
        "entry": graph.entry,
        "states": [
            {
                "name": s.name,
                "kind": s.kind,
                "emits": s.emits,
                "adds_item": s.adds_item,
                "pays_cart": s.pays_cart,
                "decision_group": s.decision_group,
                "reports_as": s.reports_as,
                "purchase": s.purchase,
            }
            for s in sorted(graph.states.values(), key=lambda s: s.name)
        ],
        "edges": [
            {
                "from": e.source,
                "to": e.target,
                "labels": list(e.prob_labels),
                "needs_items": e.needs_items,
            }
            for e in graph.edges
        ],
    }


def _resolve_scenario(section, classes, violations):
    if section is None:
        section = "S1"
    if isinstance(section, str):
        if section not in SCENARIO_PRESETS:
            violations.append(
                f"unknown scenario preset {section!r} (have {', '.join(sorted(SCENARIO_PRESETS))})"
            )
            section = "S1"
        mapping = SCENARIO_PRESETS[section]
        name: str | None = section
        rate = None
    elif isinstance(section, dict):
        name = section.get("name")
        rate = section.get("lambda")
        if "mix" in section:
            mapping = section["mix"]
        elif name in SCENARIO_PRESETS:
            mapping = SCENARIO_PRESETS[name]
        else:
            violations.append("scenario section needs a 'mix' mapping or a preset 'name'")
            mapping = SCENARIO_PRESETS["S1"]
    else:
        violations.append("scenario must be a preset name or a mapping")
        mapping, name, rate = SCENARIO_PRESETS["S1"], "S1", None
    try:
        mix = ScenarioMix.from_mapping(mapping)
    except WorkloadError as exc:
        violations.append(str(exc))
        mix = ScenarioMix.from_mapping(SCENARIO_PRESETS["S1"])
    if rate is not None:
        try:
            rate = float(rate)
        except (TypeError, ValueError):
            violations.append(f"scenario.lambda must be a number, got {rate!r}")
            rate = None
    return mix, rate, name


def _resolve_farm(section, violations):
    servers = farm_mod.default_server_specs()
    routes = dict(farm_mod.DEFAULT_ROUTES)
    fes_enabled = True
    wan: WanSpec | None = WanSpec()
    if section is None:
        return servers, routes, fes_enabled, wan
    if not isinstance(section, dict):
        violations.append("farm section must be a mapping")
        return servers, routes, fes_enabled, wan
    raw_servers = section.get("servers")
    if raw_servers is not None:
        servers = {}
        items = raw_servers.items() if isinstance(raw_servers, dict) else (
            (s.get("name"), s) for s in raw_servers
        )
        for name, body in items:
            try:
                servers[name] = ServerSpec(
                    name,
                    float(body["mean"]),
                    None if body.get("sigma") is None else float(body["sigma"]),
                )
            except (farm_mod.FarmError, KeyError, TypeError, ValueError) as exc:
                violations.append(f"server {name!r}: {exc}")
    raw_routes = section.get("routes")
    if raw_routes is not None:
        routes = {rtype: tuple(seq) for rtype, seq in raw_routes.items()}
    fes_enabled = bool(section.get("fes_enabled", True))
    if "wan" in section:
        raw_wan = section["wan"]
        if raw_wan is None:
            wan = None
        else:
            try:
                wan = WanSpec(float(raw_wan.get("mean", 0.5)), float(raw_wan.get("sigma", 0.133333)))
            except (farm_mod.FarmError, AttributeError, TypeError, ValueError) as exc:
                violations.append(f"wan: {exc}")
    return servers, routes, fes_enabled, wan


def _resolve_run(section, violations) -> RunSettings:
    defaults = RunSettings()
    if section is None:
        return defaults
    if not isinstance(section, dict):
        violations.append("run section must be a mapping")
        return defaults
    aliases = {"seed": "master_seed"}
    kwargs = {}
    valid = set(RunSettings.__dataclass_fields__)
    for key, value in section.items():
        key = aliases.get(key, key)
        if key not in valid:
            violations.append(f"unknown run setting {key!r}")
            continue
        kwargs[key] = value
    try:
        settings = RunSettings(**kwargs)
    except (TypeError, ValueError) as exc:
        violations.append(f"run section: {exc}")
        return defaults
    if settings.happiness_rule not in ("mean", "max"):
        violations.append("run.happiness_rule must be 'mean' or 'max'")
    return settings


def _resolve_sweep(section, violations) -> SweepSettings:
    defaults = SweepSettings()
    if section is None:
        return defaults
    if not isinstance(section, dict):
        violations.append("sweep section must be a mapping")
        return defaults
    aliases = {"from": "lambda_from", "to": "lambda_to", "step": "lambda_step"}
    kwargs = {}
    for key, value in section.items():
        key = aliases.get(key, key)
        if key not in SweepSettings.__dataclass_fields__:
            violations.append(f"unknown sweep setting {key!r}")
            continue
        try:
            kwargs[key] = float(value)
        except (TypeError, ValueError):
            violations.append(f"sweep.{key} must be a number, got {value!r}")
    return SweepSettings(**kwargs)
