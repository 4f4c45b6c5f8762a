"""Customer behavior model: a probabilistic session graph, session walks, and
the absorbing-chain solver used as the analytic cross-check.

A shopping session is a walk over a :class:`CbmgGraph` -- a labeled state graph
whose transition probabilities come from a :class:`CustomerClass` (one vector
per shopper profile). Thinking states hold the customer for an exponential
think time and then issue an HTTP request; instant states (cart updates,
decision points) consume no simulated time; absorbing states end the session
with or without a purchase.

Two routes produce session statistics and must agree:

* :class:`SessionWalk` drives a stochastic walk on the simulator, and
* :func:`expected_visits` solves the absorbing Markov chain exactly via the
  fundamental matrix, v = e (I - Q)^-1.

When the strict cart rule is active (checkout transitions are gated on a
non-empty cart and their mass is redistributed proportionally onto the other
edges of the decision point), the chain is solved on the state x {empty cart,
non-empty cart} augmented space, which keeps the analytic route exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .kernel import RandomStream, SimulationError, Simulator, sample_exponential

__all__ = [
    "BehaviorError",
    "CbmgState",
    "CbmgEdge",
    "CbmgGraph",
    "CustomerClass",
    "SessionRecord",
    "SessionWalk",
    "builtin_classes",
    "default_graph",
    "validate_class",
    "validate_graph",
    "edge_weights",
    "sample_transition",
    "compile_transitions",
    "solve_absorbing_chain",
    "expected_visits",
    "analytic_session_metrics",
    "expected_requests_by_type",
    "simulate_session",
    "DEFAULT_THINK_MEANS",
]

PROB_EPS = 1e-9
MAX_TRANSITIONS = 10_000


class BehaviorError(ValueError):
    """Invalid behavior-model data (graph, class vector, or their pairing)."""


@dataclass(frozen=True)
class CbmgState:
    """One node of the behavior graph.

    kind is one of ``entry``, ``thinking``, ``instant``, ``absorbing``.
    ``emits`` names the request type issued on each visit (after the think time
    for thinking states). ``reports_as`` merges split states (e.g. the two
    add-to-cart nodes) under one reported name.
    """

    name: str
    kind: str
    emits: str | None = None
    adds_item: bool = False
    pays_cart: bool = False
    decision_group: int | None = None
    reports_as: str | None = None
    purchase: bool = False  # meaningful on absorbing states only

    @property
    def report_name(self) -> str:
        return self.reports_as or self.name


@dataclass(frozen=True)
class CbmgEdge:
    """Labeled transition; its probability is the product of the class
    probabilities named in ``prob_labels`` (empty product = 1.0).

    ``needs_items`` marks edges that are gated on a non-empty cart under the
    strict cart rule.
    """

    source: str
    target: str
    prob_labels: tuple[str, ...] = ()
    needs_items: bool = False


@dataclass(frozen=True)
class CustomerClass:
    """One shopper profile: named transition probabilities plus per-state mean
    think times in seconds."""

    name: str
    probs: Mapping[str, float]
    think_means: Mapping[str, float]


class CbmgGraph:
    """Immutable behavior graph with a single entry and absorbing exits."""

    def __init__(self, states: Iterable[CbmgState], edges: Iterable[CbmgEdge], entry: str = "Entry"):
        self.states: dict[str, CbmgState] = {}
        for s in states:
            if s.name in self.states:
                raise BehaviorError(f"duplicate state {s.name!r}")
            if s.kind not in ("entry", "thinking", "instant", "absorbing"):
                raise BehaviorError(f"state {s.name!r}: unknown kind {s.kind!r}")
            self.states[s.name] = s
        if entry not in self.states:
            raise BehaviorError(f"entry state {entry!r} is not defined")
        self.entry = entry
        self._out: dict[str, tuple[CbmgEdge, ...]] = {name: () for name in self.states}
        for e in edges:
            if e.source not in self.states or e.target not in self.states:
                raise BehaviorError(f"edge {e.source!r}->{e.target!r} references unknown state")
            self._out[e.source] = self._out[e.source] + (e,)
        self.edges: tuple[CbmgEdge, ...] = tuple(e for name in self.states for e in self._out[name])

    def state(self, name: str) -> CbmgState:
        return self.states[name]

    def out_edges(self, name: str) -> tuple[CbmgEdge, ...]:
        return self._out[name]

    @property
    def absorbing(self) -> tuple[CbmgState, ...]:
        return tuple(s for s in self.states.values() if s.kind == "absorbing")

    @property
    def thinking(self) -> tuple[CbmgState, ...]:
        return tuple(s for s in self.states.values() if s.kind == "thinking")

    @property
    def emitting(self) -> tuple[CbmgState, ...]:
        return tuple(s for s in self.states.values() if s.emits)


# ---------------------------------------------------------------------------
# Built-in profiles and the default graph


DEFAULT_THINK_MEANS = {"Browse": 60.0, "Search": 60.0, "Checkout": 180.0}

_PROFILES = {
    "rare": dict(browse=0.50, found=0.10, add=0.10, cont=0.10, chk=0.10, end=0.80),
    "ordinary": dict(browse=0.50, found=0.50, add=0.50, cont=0.33, chk=0.34, end=0.33),
    "frequent": dict(browse=0.50, found=0.90, add=0.90, cont=0.50, chk=0.45, end=0.05),
}


def _profile_probs(p: dict) -> dict[str, float]:
    probs = {
        "Browse": p["browse"],
        "Search": 1.0 - p["browse"],
        "Found": p["found"],
        "NotFound": 1.0 - p["found"],
        "Add": p["add"],
        "NotAdd": 1.0 - p["add"],
    }
    for k in (1, 2, 3):
        probs[f"Continue{k}"] = p["cont"]
        probs[f"Checkout{k}"] = p["chk"]
        probs[f"End{k}"] = p["end"]
    return probs


def builtin_classes() -> dict[str, CustomerClass]:
    """The three built-in shopper profiles (rare, ordinary, frequent)."""
    return {
        name: CustomerClass(name, _profile_probs(p), dict(DEFAULT_THINK_MEANS))
        for name, p in _PROFILES.items()
    }


def default_graph(not_found_target: str = "exit") -> CbmgGraph:
    """The shipped session graph.

    Entry picks Browse or Search. Browsing may put an item in the cart; a
    search only reaches the cart branch when it succeeds. Every action funnels
    into a decision point (continue shopping / check out / leave); checkout
    pays the cart and ends the session with a purchase.

    ``not_found_target`` controls where a failed search goes: ``"exit"``
    (default -- the customer leaves empty-handed) or ``"group3"`` (a third
    decision point, same probability vector shape).
    """
    if not_found_target not in ("exit", "group3"):
        raise BehaviorError(f"not_found_target must be 'exit' or 'group3', got {not_found_target!r}")
    nf_target = "ExitNoPay" if not_found_target == "exit" else "Decision3"
    states = [
        CbmgState("Entry", "entry"),
        CbmgState("Browse", "thinking", emits="Browse"),
        CbmgState("Search", "thinking", emits="Search"),
        CbmgState("AddFromBrowse", "instant", emits="Add", adds_item=True, reports_as="AddToCart"),
        CbmgState("AddFromSearch", "instant", emits="Add", adds_item=True, reports_as="AddToCart"),
        CbmgState("Decision1", "instant", decision_group=1),
        CbmgState("Decision2", "instant", decision_group=2),
        CbmgState("Decision3", "instant", decision_group=3),
        CbmgState("Checkout", "thinking", emits="Checkout", pays_cart=True),
        CbmgState("ExitPay", "absorbing", purchase=True),
        CbmgState("ExitNoPay", "absorbing"),
    ]
    edges = [
        CbmgEdge("Entry", "Browse", ("Browse",)),
        CbmgEdge("Entry", "Search", ("Search",)),
        CbmgEdge("Browse", "AddFromBrowse", ("Add",)),
        CbmgEdge("Browse", "Decision1", ("NotAdd",)),
        CbmgEdge("Search", "AddFromSearch", ("Found", "Add")),
        CbmgEdge("Search", "Decision2", ("Found", "NotAdd")),
        CbmgEdge("Search", nf_target, ("NotFound",)),
        CbmgEdge("AddFromBrowse", "Decision1"),
        CbmgEdge("AddFromSearch", "Decision2"),
    ]
    for k in (1, 2, 3):
        edges += [
            CbmgEdge(f"Decision{k}", "Entry", (f"Continue{k}",)),
            CbmgEdge(f"Decision{k}", "Checkout", (f"Checkout{k}",), needs_items=True),
            CbmgEdge(f"Decision{k}", "ExitNoPay", (f"End{k}",)),
        ]
    edges.append(CbmgEdge("Checkout", "ExitPay"))
    if not_found_target == "exit":
        # Decision3 is unreferenced in this wiring; keep the graph tidy.
        states = [s for s in states if s.name != "Decision3"]
        edges = [e for e in edges if e.source != "Decision3"]
    return CbmgGraph(states, edges)


# ---------------------------------------------------------------------------
# Probabilities, sampling, validation


def edge_weights(
    graph: CbmgGraph,
    cls: CustomerClass,
    state_name: str,
    has_items: bool = True,
    strict_cart: bool = False,
) -> list[tuple[CbmgEdge, float]]:
    """Outgoing edges of a state with their effective probabilities.

    Under the strict cart rule with an empty cart, item-gated edges get zero
    mass, redistributed proportionally onto the remaining edges.
    """
    out = graph.out_edges(state_name)
    weights = []
    for e in out:
        p = 1.0
        for label in e.prob_labels:
            p *= cls.probs[label]
        weights.append(p)
    if strict_cart and not has_items:
        gated = sum(w for e, w in zip(out, weights) if e.needs_items)
        if gated > 0.0:
            keep = sum(w for e, w in zip(out, weights) if not e.needs_items)
            if keep <= 0.0:
                raise BehaviorError(
                    f"state {state_name!r}: every transition requires items; "
                    "cannot redistribute checkout mass for an empty cart"
                )
            scale = (keep + gated) / keep
            weights = [0.0 if e.needs_items else w * scale for e, w in zip(out, weights)]
    return list(zip(out, weights))


def sample_transition(
    graph: CbmgGraph,
    cls: CustomerClass,
    state: CbmgState,
    stream: RandomStream,
    has_items: bool = True,
    strict_cart: bool = False,
) -> CbmgState:
    """Draw the successor state according to the class probabilities."""
    if state.kind == "absorbing":
        raise BehaviorError(f"cannot transition out of absorbing state {state.name!r}")
    pairs = edge_weights(graph, cls, state.name, has_items, strict_cart)
    u = stream.uniform()
    acc = 0.0
    chosen = None
    for edge, w in pairs:
        if w <= 0.0:
            continue
        chosen = edge
        acc += w
        if u < acc:
            break
    if chosen is None:
        raise BehaviorError(f"state {state.name!r} has no positive-probability transition")
    return graph.state(chosen.target)


def compile_transitions(
    graph: CbmgGraph, cls: CustomerClass, strict_cart: bool = False
) -> dict[tuple[str, bool], tuple[list[float], list[CbmgState]]]:
    """Cumulative transition tables for fast sampling, keyed by
    (state name, cart-permits-everything).

    The False bucket holds the empty-cart weights under the strict rule; with
    ``strict_cart=False`` both buckets are identical. The last cumulative
    weight is padded past 1 so a scan always terminates.
    """
    table = {}
    for name, state in graph.states.items():
        if state.kind == "absorbing":
            continue
        for bucket in (True, False):
            try:
                pairs = edge_weights(
                    graph, cls, name, has_items=bucket, strict_cart=strict_cart
                )
            except BehaviorError:
                if bucket:
                    raise
                # Empty-cart mass is infeasible here; only an error if a walk
                # actually reaches this state with an empty cart.
                table[(name, bucket)] = None
                continue
            cums: list[float] = []
            targets: list[CbmgState] = []
            acc = 0.0
            for edge, w in pairs:
                if w <= 0.0:
                    continue
                acc += w
                cums.append(acc)
                targets.append(graph.state(edge.target))
            if not cums:
                raise BehaviorError(f"state {name!r} has no positive-probability transition")
            cums[-1] = 2.0  # float-sum guard; true mass is 1
            table[(name, bucket)] = (cums, targets)
    return table


_COMPLEMENT_GROUPS = (
    ("Browse", "Search"),
    ("Found", "NotFound"),
    ("Add", "NotAdd"),
    ("Continue1", "Checkout1", "End1"),
    ("Continue2", "Checkout2", "End2"),
    ("Continue3", "Checkout3", "End3"),
)


def validate_class(cls: CustomerClass) -> list[str]:
    """Check a class vector on its own; returns human-readable violations."""
    violations = []
    for label, p in cls.probs.items():
        if not (0.0 <= p <= 1.0):
            violations.append(f"class {cls.name!r}: probability {label}={p!r} outside [0, 1]")
    for group in _COMPLEMENT_GROUPS:
        if all(label in cls.probs for label in group):
            total = sum(cls.probs[label] for label in group)
            if abs(total - 1.0) > PROB_EPS:
                violations.append(
                    f"class {cls.name!r}: group {'/'.join(group)} sums to {total:g}, expected 1"
                )
    for state_name, mean in cls.think_means.items():
        if mean < 0.0:
            violations.append(f"class {cls.name!r}: think time for {state_name!r} is negative")
    return violations


def validate_graph(graph: CbmgGraph, cls: CustomerClass, strict_cart: bool = False) -> list[str]:
    """Check graph/class pairing invariants; an empty list means valid.

    Violations are data (for the config validator), not exceptions.
    """
    violations = validate_class(cls)
    for e in graph.edges:
        for label in e.prob_labels:
            if label not in cls.probs:
                violations.append(
                    f"edge {e.source}->{e.target}: class {cls.name!r} lacks probability {label!r}"
                )
    if violations:
        return violations  # weight computations below need the labels present

    for s in graph.states.values():
        out = graph.out_edges(s.name)
        if s.kind == "absorbing":
            if out:
                violations.append(f"absorbing state {s.name!r} has outgoing transitions")
            continue
        if not out:
            violations.append(f"state {s.name!r} has no outgoing transitions")
            continue
        total = sum(w for _, w in edge_weights(graph, cls, s.name, has_items=True))
        if abs(total - 1.0) > PROB_EPS:
            violations.append(
                f"state {s.name!r}: outgoing probabilities sum to {total:g}, expected 1"
            )
        if s.kind == "thinking" and cls.think_means.get(s.name, 0.0) <= 0.0:
            violations.append(
                f"class {cls.name!r}: thinking state {s.name!r} needs a positive think time"
            )
        if strict_cart and any(e.needs_items for e in out):
            keep = sum(
                w for e, w in edge_weights(graph, cls, s.name, has_items=True) if not e.needs_items
            )
            if keep <= 0.0:
                violations.append(
                    f"state {s.name!r}: strict cart rule leaves no transition for an empty cart"
                )

    # Reachability over positive-probability edges.
    seen = {graph.entry}
    frontier = [graph.entry]
    while frontier:
        name = frontier.pop()
        if graph.state(name).kind == "absorbing":
            continue
        for e, w in edge_weights(graph, cls, name, has_items=True):
            if w > 0.0 and e.target not in seen:
                seen.add(e.target)
                frontier.append(e.target)
        if strict_cart:
            try:
                empty_pairs = edge_weights(graph, cls, name, has_items=False, strict_cart=True)
            except BehaviorError:
                continue  # already reported as an empty-cart violation above
            for e, w in empty_pairs:
                if w > 0.0 and e.target not in seen:
                    seen.add(e.target)
                    frontier.append(e.target)
    for name in graph.states:
        if name not in seen:
            violations.append(f"state {name!r} unreachable from {graph.entry!r}")

    if not violations:
        try:
            solve_absorbing_chain(graph, cls, strict_cart=strict_cart)
        except BehaviorError as exc:
            violations.append(str(exc))
    return violations


# ---------------------------------------------------------------------------
# Analytic route: fundamental matrix on the (state, has-items) chain


@dataclass
class ChainSolution:
    """Exact per-session expectations for one class."""

    visits: dict[str, float]  # by report name, including entry/decision states
    absorption: dict[str, float]  # absorbing state name -> probability
    items_added: float  # expected cart inserts per session
    purchase_probability: float


def solve_absorbing_chain(
    graph: CbmgGraph, cls: CustomerClass, strict_cart: bool = False
) -> ChainSolution:
    """Expected visits and absorption split via v = e (I - Q)^-1.

    The transient space is the set of (state, has_items) pairs reachable from
    (entry, empty); without the strict rule the item flag never changes the
    weights, so this reduces to the plain chain.
    """
    start = (graph.entry, False)
    index: dict[tuple[str, bool], int] = {start: 0}
    order: list[tuple[str, bool]] = [start]
    rows: list[list[tuple[int, float]]] = []
    absorb_rows: list[list[tuple[str, float]]] = []
    i = 0
    while i < len(order):
        name, items = order[i]
        state = graph.state(name)
        row: list[tuple[int, float]] = []
        absorb: list[tuple[str, float]] = []
        if state.kind != "absorbing":
            items_out = False if state.pays_cart else items
            for e, w in edge_weights(graph, cls, name, has_items=items, strict_cart=strict_cart):
                if w <= 0.0:
                    continue
                target = graph.state(e.target)
                if target.kind == "absorbing":
                    absorb.append((target.name, w))
                    continue
                key = (target.name, items_out or target.adds_item)
                if key not in index:
                    index[key] = len(order)
                    order.append(key)
                row.append((index[key], w))
        rows.append(row)
        absorb_rows.append(absorb)
        i += 1

    n = len(order)
    q = np.zeros((n, n))
    for src, row in enumerate(rows):
        for dst, w in row:
            q[src, dst] += w
    e0 = np.zeros(n)
    e0[0] = 1.0
    try:
        visits_vec = np.linalg.solve(np.eye(n) - q.T, e0)
    except np.linalg.LinAlgError:
        raise BehaviorError(
            f"class {cls.name!r}: absorption probability below 1 (singular chain)"
        ) from None
    if not np.all(np.isfinite(visits_vec)) or np.any(visits_vec < -1e-9):
        raise BehaviorError(f"class {cls.name!r}: absorption probability below 1")

    visits: dict[str, float] = {}
    items_added = 0.0
    absorption = {s.name: 0.0 for s in graph.absorbing}
    purchase = 0.0
    for idx, (name, _items) in enumerate(order):
        state = graph.state(name)
        v = float(visits_vec[idx])
        visits[state.report_name] = visits.get(state.report_name, 0.0) + v
        if state.adds_item:
            items_added += v
        for exit_name, w in absorb_rows[idx]:
            mass = v * w
            absorption[exit_name] += mass
            if graph.state(exit_name).purchase:
                purchase += mass
    total = sum(absorption.values())
    if abs(total - 1.0) > 1e-9:
        raise BehaviorError(
            f"class {cls.name!r}: absorption probability is {total:g}, expected 1"
        )
    return ChainSolution(visits, absorption, items_added, purchase)


def expected_visits(graph: CbmgGraph, cls: CustomerClass, strict_cart: bool = False) -> dict[str, float]:
    """Expected visits per session, by reported state name (exact)."""
    return solve_absorbing_chain(graph, cls, strict_cart).visits


def expected_requests_by_type(
    graph: CbmgGraph, cls: CustomerClass, strict_cart: bool = False
) -> dict[str, float]:
    """Expected requests per session, per request type (one per emitting visit)."""
    sol = solve_absorbing_chain(graph, cls, strict_cart)
    # Visits were aggregated by report name; emitting states sharing a report
    # name also share a request type by construction, so aggregate over those.
    by_type: dict[str, float] = {}
    seen_reports: set[str] = set()
    for s in graph.emitting:
        if s.report_name in seen_reports:
            continue
        seen_reports.add(s.report_name)
        by_type[s.emits] = by_type.get(s.emits, 0.0) + sol.visits.get(s.report_name, 0.0)
    return by_type


@dataclass
class AnalyticSessionMetrics:
    """Mix-weighted session metrics derivable without simulation."""

    pm1_visits: dict[str, float]
    pm2_sojourn_fractions: dict[str, float]
    pm4_session_seconds: float
    pm5_buy_to_visit: float
    per_class: dict[str, ChainSolution]


def analytic_session_metrics(
    graph: CbmgGraph,
    classes: Mapping[str, CustomerClass],
    mix,
    strict_cart: bool = False,
) -> AnalyticSessionMetrics:
    """PM1/PM2/PM4/PM5 from the chain solution, weighted by the scenario mix.

    ``mix`` is any object with ``items()`` yielding (class name, weight).
    """
    pm1: dict[str, float] = {}
    think_seconds: dict[str, float] = {}
    pm5 = 0.0
    per_class = {}
    for name, weight in mix.items():
        cls = classes[name]
        sol = solve_absorbing_chain(graph, cls, strict_cart)
        per_class[name] = sol
        pm5 += weight * sol.purchase_probability
        for rname, v in sol.visits.items():
            pm1[rname] = pm1.get(rname, 0.0) + weight * v
        for s in graph.thinking:
            mean = cls.think_means.get(s.name, 0.0)
            think_seconds[s.report_name] = think_seconds.get(s.report_name, 0.0) + (
                weight * sol.visits.get(s.report_name, 0.0) * mean
            )
    pm4 = sum(think_seconds.values())
    pm2 = {name: (t / pm4 if pm4 > 0 else 0.0) for name, t in think_seconds.items()}
    return AnalyticSessionMetrics(pm1, pm2, pm4, pm5, per_class)


# ---------------------------------------------------------------------------
# Simulated route: event-driven session walk


@dataclass
class SessionRecord:
    """Outcome of one session walk.

    Sojourns count think time only by default, so the analytic chain applies;
    response-time waits are added when the walk is built with
    ``sojourn_includes_response=True``.
    """

    class_name: str
    session_id: int
    start: float
    end: float = float("nan")
    visits: dict[str, int] = field(default_factory=dict)
    sojourn: dict[str, float] = field(default_factory=dict)
    request_ids: list[int] = field(default_factory=list)
    request_rts: list[float] = field(default_factory=list)
    items_added: int = 0
    items_paid: int = 0
    outcome: str = "open"  # paid | abandoned_with_items | abandoned_empty | cut_off_by_window

    @property
    def request_count(self) -> int:
        return len(self.request_ids)


class SessionWalk:
    """Event-driven walk of one customer session on the simulator.

    In a thinking state the customer thinks (exponential), then issues the
    state's request through ``dispatch(request_type, on_response)`` and resumes
    when the response lands; instant states chain without consuming time.
    ``dispatch`` returns an opaque request id (or None).
    """

    __slots__ = (
        "_sim",
        "_graph",
        "_cls",
        "_think_stream",
        "_transition_stream",
        "_dispatch",
        "_on_finish",
        "_strict_cart",
        "_max_transitions",
        "_sojourn_includes_response",
        "_table",
        "record",
        "cart",
        "_state",
        "_transitions",
        "_think_started",
        "_pending_think",
        "done",
    )

    def __init__(
        self,
        sim: Simulator,
        graph: CbmgGraph,
        cls: CustomerClass,
        think_stream: RandomStream,
        transition_stream: RandomStream,
        dispatch: Callable[[str, Callable[[float], None]], int | None],
        on_finish: Callable[["SessionWalk"], None],
        session_id: int = 0,
        strict_cart: bool = False,
        max_transitions: int = MAX_TRANSITIONS,
        sojourn_includes_response: bool = False,
        compiled=None,
    ) -> None:
        self._sim = sim
        self._graph = graph
        self._cls = cls
        self._think_stream = think_stream
        self._transition_stream = transition_stream
        self._dispatch = dispatch
        self._on_finish = on_finish
        self._strict_cart = strict_cart
        self._max_transitions = max_transitions
        self._sojourn_includes_response = sojourn_includes_response
        self._table = compiled if compiled is not None else compile_transitions(
            graph, cls, strict_cart
        )
        self.record = SessionRecord(cls.name, session_id, start=sim.now)
        self.cart = 0
        self._state: CbmgState | None = None
        self._transitions = 0
        self._think_started: float | None = None
        self._pending_think = 0.0
        self.done = False

    def start(self) -> None:
        self._enter(self._graph.state(self._graph.entry))

    # -- state machine ------------------------------------------------------

    def _enter(self, state: CbmgState) -> None:
        self._transitions += 1
        if self._transitions > self._max_transitions:
            raise SimulationError(
                f"session of class {self._cls.name!r} exceeded "
                f"{self._max_transitions} transitions without absorbing"
            )
        self._state = state
        rec = self.record
        name = state.report_name
        rec.visits[name] = rec.visits.get(name, 0) + 1
        if state.adds_item:
            self.cart += 1
            rec.items_added += 1
        if state.kind == "absorbing":
            self._finish(state)
        elif state.kind == "thinking":
            delay = sample_exponential(self._think_stream, self._cls.think_means[state.name])
            self._think_started = self._sim.now
            self._pending_think = delay
            self._sim.schedule_after(delay, self._think_done)
        elif state.emits:
            self._issue_request()
        else:
            self._advance()

    def _think_done(self) -> None:
        rec = self.record
        name = self._state.report_name
        rec.sojourn[name] = rec.sojourn.get(name, 0.0) + self._pending_think
        self._think_started = None
        if self._state.emits:
            self._issue_request()
        else:
            self._advance()

    def _issue_request(self) -> None:
        rid = self._dispatch(self._state.emits, self._on_response)
        self.record.request_ids.append(rid if rid is not None else -1)

    def _on_response(self, response_time: float) -> None:
        if self.done:
            return  # response landed after the window cut this session off
        rec = self.record
        rec.request_rts.append(response_time)
        if self._sojourn_includes_response:
            name = self._state.report_name
            rec.sojourn[name] = rec.sojourn.get(name, 0.0) + response_time
        self._advance()

    def _advance(self) -> None:
        state = self._state
        if state.pays_cart:
            self.record.items_paid += self.cart
            self.cart = 0
        entry = self._table[(state.name, self.cart > 0 or not self._strict_cart)]
        if entry is None:
            raise BehaviorError(
                f"state {state.name!r}: every transition requires items and the cart is empty"
            )
        cums, targets = entry
        u = self._transition_stream.uniform()
        i = 0
        while u >= cums[i]:
            i += 1
        self._enter(targets[i])

    def _finish(self, state: CbmgState) -> None:
        rec = self.record
        rec.end = self._sim.now
        if state.purchase:
            rec.outcome = "paid"
        elif rec.items_added > 0:
            rec.outcome = "abandoned_with_items"
        else:
            rec.outcome = "abandoned_empty"
        self.done = True
        self._on_finish(self)

    def cut_off(self, at: float) -> SessionRecord:
        """Close a still-open session at the window end with partial tallies."""
        if self.done:
            return self.record
        rec = self.record
        if self._think_started is not None:
            name = self._state.report_name
            rec.sojourn[name] = rec.sojourn.get(name, 0.0) + (at - self._think_started)
        rec.end = at
        rec.outcome = "cut_off_by_window"
        self.done = True
        return self.record


def simulate_session(
    graph: CbmgGraph,
    cls: CustomerClass,
    think_stream: RandomStream,
    transition_stream: RandomStream,
    strict_cart: bool = False,
    session_id: int = 0,
) -> SessionRecord:
    """Walk one session on a private clock with zero response times.

    Convenience for behavior-only studies and the oracle-equivalence checks;
    full runs wire :class:`SessionWalk` to the server farm instead.
    """
    sim = Simulator()
    finished: list[SessionWalk] = []

    def dispatch(_rtype: str, on_response: Callable[[float], None]) -> None:
        on_response(0.0)

    walk = SessionWalk(
        sim, graph, cls, think_stream, transition_stream, dispatch, finished.append,
        session_id=session_id, strict_cart=strict_cart,
    )
    walk.start()
    sim.run(float("inf"))
    if not finished:
        raise SimulationError("session failed to absorb")
    return finished[0].record
