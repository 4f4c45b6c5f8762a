"""Behavior graph contracts: validation, transition sampling, the walk, and
agreement between the simulated walk and the absorbing-chain solution."""

import math

import pytest

from shopsim.behavior import (
    BehaviorError,
    CbmgEdge,
    CbmgGraph,
    CbmgState,
    CustomerClass,
    SessionWalk,
    analytic_session_metrics,
    builtin_classes,
    compile_transitions,
    default_graph,
    edge_weights,
    expected_visits,
    sample_transition,
    simulate_session,
    solve_absorbing_chain,
    validate_graph,
)
from shopsim.kernel import SimulationError, Simulator, StreamFamily
from shopsim.workload import ScenarioMix


def streams(seed=5):
    family = StreamFamily(seed)
    return family.stream("think"), family.stream("transitions")


def tampered_class(name="frequent", **overrides):
    cls = builtin_classes()[name]
    probs = dict(cls.probs)
    probs.update(overrides)
    return CustomerClass(cls.name, probs, dict(cls.think_means))


# ---------------------------------------------------------------------------
# Validation


@pytest.mark.parametrize("class_name", ["rare", "ordinary", "frequent"])
@pytest.mark.parametrize("strict", [False, True])
def test_builtin_classes_validate_on_default_graph(class_name, strict):
    graph = default_graph()
    cls = builtin_classes()[class_name]
    assert validate_graph(graph, cls, strict_cart=strict) == []


@pytest.mark.parametrize("target", ["exit", "group3"])
def test_both_not_found_wirings_validate(target):
    graph = default_graph(target)
    for cls in builtin_classes().values():
        assert validate_graph(graph, cls, strict_cart=True) == []


def test_overfull_decision_group_is_reported():
    bad = tampered_class(Continue1=0.5, Checkout1=0.5, End1=0.5)
    violations = validate_graph(default_graph(), bad)
    assert any("sums to 1.5" in v for v in violations)


def test_unreachable_state_is_reported():
    graph = default_graph()
    states = list(graph.states.values()) + [CbmgState("Island", "instant")]
    edges = list(graph.edges) + [CbmgEdge("Island", "ExitNoPay")]
    bigger = CbmgGraph(states, edges)
    violations = validate_graph(bigger, builtin_classes()["rare"])
    assert any("unreachable" in v for v in violations)


def test_absorbing_state_with_outgoing_edge_is_reported():
    graph = default_graph()
    edges = list(graph.edges) + [CbmgEdge("ExitNoPay", "Entry")]
    broken = CbmgGraph(graph.states.values(), edges)
    violations = validate_graph(broken, builtin_classes()["rare"])
    assert any("absorbing" in v for v in violations)


def test_missing_probability_label_is_reported():
    cls = builtin_classes()["rare"]
    probs = {k: v for k, v in cls.probs.items() if k != "Found"}
    incomplete = CustomerClass("rare", probs, dict(cls.think_means))
    violations = validate_graph(default_graph(), incomplete)
    assert any("Found" in v for v in violations)


def test_strict_rule_needs_cart_free_mass():
    # every empty-cart transition out of the decision point is removed
    bad = tampered_class(Continue1=0.0, Checkout1=1.0, End1=0.0,
                         Continue2=0.0, Checkout2=1.0, End2=0.0,
                         Continue3=0.0, Checkout3=1.0, End3=0.0)
    violations = validate_graph(default_graph(), bad, strict_cart=True)
    assert any("empty cart" in v for v in violations)
    assert validate_graph(default_graph(), bad, strict_cart=False) == []


# ---------------------------------------------------------------------------
# Transition sampling


def test_probability_one_edge_always_taken():
    graph = default_graph()
    cls = builtin_classes()["frequent"]
    _, transitions = streams()
    checkout = graph.state("Checkout")
    assert all(
        sample_transition(graph, cls, checkout, transitions).name == "ExitPay"
        for _ in range(200)
    )


def test_sampling_from_absorbing_state_is_an_error():
    graph = default_graph()
    cls = builtin_classes()["frequent"]
    _, transitions = streams()
    with pytest.raises(BehaviorError):
        sample_transition(graph, cls, graph.state("ExitPay"), transitions)


def test_compiled_table_agrees_with_direct_sampling():
    graph = default_graph()
    cls = builtin_classes()["ordinary"]
    table = compile_transitions(graph, cls, strict_cart=True)
    for state_name in ("Entry", "Browse", "Search", "Decision1", "Decision2"):
        for bucket in (True, False):
            a = StreamFamily(17).stream("transitions")
            b = StreamFamily(17).stream("transitions")
            state = graph.state(state_name)
            for _ in range(500):
                direct = sample_transition(
                    graph, cls, state, a, has_items=bucket, strict_cart=True
                )
                cums, targets = table[(state_name, bucket)]
                u = b.uniform()
                i = 0
                while u >= cums[i]:
                    i += 1
                assert targets[i].name == direct.name


def test_entry_split_matches_probability():
    graph = default_graph()
    cls = builtin_classes()["frequent"]
    table = compile_transitions(graph, cls)
    cums, targets = table[("Entry", True)]
    stream = StreamFamily(23).stream("transitions")
    n = 1_000_000
    browse = 0
    for _ in range(n):
        u = stream.uniform()
        i = 0
        while u >= cums[i]:
            i += 1
        if targets[i].name == "Browse":
            browse += 1
    assert abs(browse / n - 0.5) < 0.01


def test_rare_shopper_leaves_eighty_percent_of_decisions():
    graph = default_graph()
    cls = builtin_classes()["rare"]
    _, transitions = streams(29)
    decision = graph.state("Decision1")
    n = 100_000
    ends = sum(
        sample_transition(graph, cls, decision, transitions).name == "ExitNoPay"
        for _ in range(n)
    )
    assert abs(ends / n - 0.80) < 0.01


def test_strict_rule_redistributes_checkout_mass_proportionally():
    graph = default_graph()
    cls = builtin_classes()["frequent"]  # Continue .5 / Checkout .45 / End .05
    weights = dict(
        (e.target, w)
        for e, w in edge_weights(graph, cls, "Decision1", has_items=False, strict_cart=True)
    )
    assert weights["Checkout"] == 0.0
    assert weights["Entry"] == pytest.approx(0.5 / 0.55)
    assert weights["ExitNoPay"] == pytest.approx(0.05 / 0.55)
    base = dict(
        (e.target, w) for e, w in edge_weights(graph, cls, "Decision1", has_items=True)
    )
    assert base["Checkout"] == pytest.approx(0.45)


# ---------------------------------------------------------------------------
# Absorbing-chain solution


def loop_graph(p_loop):
    states = [
        CbmgState("A", "entry"),
        CbmgState("Exit", "absorbing"),
    ]
    edges = [
        CbmgEdge("A", "A", ("Loop",)),
        CbmgEdge("A", "Exit", ("Leave",)),
    ]
    cls = CustomerClass("looper", {"Loop": p_loop, "Leave": 1.0 - p_loop}, {})
    return CbmgGraph(states, edges, entry="A"), cls


def test_expected_visits_geometric_loop():
    graph, cls = loop_graph(0.5)
    visits = expected_visits(graph, cls)
    assert visits["A"] == pytest.approx(2.0, abs=1e-12)


def test_expected_visits_forced_path():
    states = [
        CbmgState("Entry", "entry"),
        CbmgState("Browse", "thinking", emits="Browse"),
        CbmgState("ExitNoPay", "absorbing"),
    ]
    edges = [CbmgEdge("Entry", "Browse"), CbmgEdge("Browse", "ExitNoPay")]
    graph = CbmgGraph(states, edges)
    cls = CustomerClass("only-browse", {}, {"Browse": 60.0})
    assert expected_visits(graph, cls)["Browse"] == pytest.approx(1.0, abs=1e-12)


def test_never_absorbing_chain_raises():
    graph, cls = loop_graph(1.0)
    with pytest.raises(BehaviorError):
        expected_visits(graph, cls)


def test_strict_chain_matches_independent_geometric_algebra():
    # Hand-derived closed forms for the default graph (NotFound exits) with the
    # strict cart rule, worked out via geometric-series arguments rather than
    # the linear solver.
    graph = default_graph()
    cls = builtin_classes()["frequent"]
    sol = solve_absorbing_chain(graph, cls, strict_cart=True)
    p_browse, p_found, p_add = 0.5, 0.9, 0.9
    cont, chk = 0.50, 0.45
    reach_g1 = p_add * (p_browse + (1 - p_browse) * p_found)  # cycle adds an item
    reach_g0 = (p_browse + (1 - p_browse) * p_found) - reach_g1  # decision, no item
    cont0 = cont / (1.0 - chk)  # empty-cart continue mass
    n1 = 1.0 / (1.0 - (reach_g1 + reach_g0) * cont)  # cycles once an item exists
    n0 = (1.0 + reach_g1 * cont * n1) / (1.0 - reach_g0 * cont0)
    pay1 = (reach_g1 + reach_g0) * chk / (1.0 - (reach_g1 + reach_g0) * cont)
    pay0 = (reach_g1 * (chk + cont * pay1)) / (1.0 - reach_g0 * cont0)
    assert sol.visits["Entry"] == pytest.approx(n0, rel=1e-12)
    assert sol.visits["Browse"] == pytest.approx(n0 * p_browse, rel=1e-12)
    assert sol.visits["AddToCart"] == pytest.approx(n0 * reach_g1, rel=1e-12)
    assert sol.purchase_probability == pytest.approx(pay0, rel=1e-12)
    assert sol.visits["Checkout"] == pytest.approx(pay0, rel=1e-12)


def test_absorption_probabilities_sum_to_one():
    graph = default_graph()
    for cls in builtin_classes().values():
        for strict in (False, True):
            sol = solve_absorbing_chain(graph, cls, strict_cart=strict)
            assert sum(sol.absorption.values()) == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# Analytic session metrics


def test_pm2_fractions_sum_to_one():
    graph = default_graph()
    mix = ScenarioMix(("rare", "ordinary", "frequent"), (0.1, 0.3, 0.6))
    metrics = analytic_session_metrics(graph, builtin_classes(), mix, strict_cart=True)
    assert sum(metrics.pm2_sojourn_fractions.values()) == pytest.approx(1.0, abs=1e-9)


def test_pm4_is_visit_weighted_think_time():
    graph = default_graph()
    classes = builtin_classes()
    mix = ScenarioMix(("ordinary",), (1.0,))
    metrics = analytic_session_metrics(graph, classes, mix, strict_cart=True)
    sol = solve_absorbing_chain(graph, classes["ordinary"], strict_cart=True)
    expected = (
        sol.visits["Browse"] * 60.0 + sol.visits["Search"] * 60.0 + sol.visits["Checkout"] * 180.0
    )
    assert metrics.pm4_session_seconds == pytest.approx(expected, rel=1e-12)


def test_single_state_session_pm4_equals_think_mean():
    states = [
        CbmgState("Entry", "entry"),
        CbmgState("Browse", "thinking", emits="Browse"),
        CbmgState("ExitNoPay", "absorbing"),
    ]
    edges = [CbmgEdge("Entry", "Browse"), CbmgEdge("Browse", "ExitNoPay")]
    graph = CbmgGraph(states, edges)
    classes = {"only": CustomerClass("only", {}, {"Browse": 60.0})}
    metrics = analytic_session_metrics(graph, classes, ScenarioMix(("only",), (1.0,)))
    assert metrics.pm4_session_seconds == pytest.approx(60.0)
    assert metrics.pm2_sojourn_fractions["Browse"] == pytest.approx(1.0)
    assert metrics.pm5_buy_to_visit == 0.0


# ---------------------------------------------------------------------------
# Session walk


def test_forced_path_session_record():
    cls = tampered_class(
        Browse=1.0, Search=0.0, Add=0.0, NotAdd=1.0,
        Continue1=0.0, Checkout1=0.0, End1=1.0,
        Continue2=0.0, Checkout2=0.0, End2=1.0,
        Continue3=0.0, Checkout3=0.0, End3=1.0,
    )
    think, transitions = streams(41)
    record = simulate_session(default_graph(), cls, think, transitions, strict_cart=True)
    assert record.visits["Browse"] == 1
    assert record.request_count == 1
    assert record.outcome == "abandoned_empty"
    assert record.items_added == 0
    assert math.isclose(record.sojourn["Browse"], record.end - record.start)


def test_paid_session_pays_full_cart():
    cls = tampered_class(
        Browse=1.0, Search=0.0, Add=1.0, NotAdd=0.0,
        Continue1=0.0, Checkout1=1.0, End1=0.0,
        Continue2=0.0, Checkout2=1.0, End2=0.0,
        Continue3=0.0, Checkout3=1.0, End3=0.0,
    )
    think, transitions = streams(43)
    record = simulate_session(default_graph(), cls, think, transitions, strict_cart=True)
    assert record.outcome == "paid"
    assert record.items_added == 1
    assert record.items_paid == 1
    assert record.visits["Checkout"] == 1
    assert record.request_count == 3  # Browse, Add, Checkout


def test_runaway_walk_hits_transition_cap():
    cls = tampered_class(
        Browse=1.0, Search=0.0, Add=0.0, NotAdd=1.0,
        Continue1=1.0, Checkout1=0.0, End1=0.0,
        Continue2=1.0, Checkout2=0.0, End2=0.0,
        Continue3=1.0, Checkout3=0.0, End3=0.0,
    )
    think, transitions = streams(47)
    sim = Simulator()
    walk = SessionWalk(
        sim, default_graph(), cls, think, transitions,
        dispatch=lambda rtype, cb: cb(0.0), on_finish=lambda w: None,
        strict_cart=True, max_transitions=500,
    )
    walk.start()
    with pytest.raises(SimulationError):
        sim.run(until=float("inf"))


def test_cut_off_session_accrues_partial_think_time():
    cls = builtin_classes()["frequent"]
    think, transitions = streams(53)
    sim = Simulator()
    finished = []
    walk = SessionWalk(
        sim, default_graph(), cls, think, transitions,
        dispatch=lambda rtype, cb: cb(0.0), on_finish=finished.append,
        strict_cart=True,
    )
    walk.start()
    sim.run(until=1.0)  # almost surely mid-think in Browse or Search
    if not finished:
        record = walk.cut_off(1.0)
        assert record.outcome == "cut_off_by_window"
        assert record.end == 1.0
        assert sum(record.sojourn.values()) <= 1.0 + 1e-12


# ---------------------------------------------------------------------------
# Walk vs chain (small-scale; the full criterion runs in the acceptance suite)


def run_sessions(graph, cls, n, seed, strict=True):
    family = StreamFamily(seed)
    think = family.stream("think")
    transitions = family.stream("transitions")
    table = compile_transitions(graph, cls, strict)
    sim = Simulator()
    records = []
    for i in range(n):
        walk = SessionWalk(
            sim, graph, cls, think, transitions,
            dispatch=lambda rtype, cb: cb(0.0),
            on_finish=lambda w: records.append(w.record),
            session_id=i, strict_cart=strict, compiled=table,
        )
        walk.start()
    sim.run(until=float("inf"))
    assert len(records) == n
    return records


def test_simulated_visits_track_chain_solution():
    graph = default_graph()
    cls = builtin_classes()["ordinary"]
    records = run_sessions(graph, cls, 20_000, seed=61)
    visits = {}
    for record in records:
        for name, count in record.visits.items():
            visits[name] = visits.get(name, 0) + count
    expected = expected_visits(graph, cls, strict_cart=True)
    for name, ev in expected.items():
        if ev >= 0.1:
            assert visits.get(name, 0) / len(records) == pytest.approx(ev, rel=0.03)


def test_simulated_purchase_rate_tracks_chain_solution():
    graph = default_graph()
    cls = builtin_classes()["frequent"]
    records = run_sessions(graph, cls, 20_000, seed=67)
    paid = sum(record.outcome == "paid" for record in records)
    sol = solve_absorbing_chain(graph, cls, strict_cart=True)
    assert paid / len(records) == pytest.approx(sol.purchase_probability, rel=0.03)
