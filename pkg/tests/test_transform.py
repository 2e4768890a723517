import pytest
from hypothesis import HealthCheck, given, settings

from aftco.dsl import parse_transformation_rule, parse_transformation_rules
from aftco.model import (
    Channel, Component, DataflowGraph, DeploymentElement, DeploymentModel, ElementKind, ModelBundle,
)
from aftco.transform import (
    ApplicationError, ModelState, TypedGraph, apply_rule, canonical_hash, explore, find_matches,
    match_pattern, state_cap_from_env,
)

from conftest import BUGGY
from strategies import bundles


def rule(text, name="r"):
    return parse_transformation_rule(text, name=name)


def rules_by_name(bundle):
    return {r.name: r for r in bundle.transformation_rules}


def test_to_radio_matches_once(quad_state, quad_bundle):
    r = rules_by_name(quad_bundle)["toRadio"]
    assert find_matches(r, quad_state) == [(("Radio", "Radio"), ("WiFi", "WiFi"), ("commands", "commands"))]
    assert find_matches(rules_by_name(quad_bundle)["toWiFi"], quad_state) == []


def test_apply_and_return(quad_state, quad_bundle):
    rules = rules_by_name(quad_bundle)
    radio = apply_rule(quad_state, rules["toRadio"], find_matches(rules["toRadio"], quad_state)[0])
    assert radio.bundle.deployment.successors("commands") == ("Mavlink2.0", "Radio")
    # input state untouched
    assert quad_state.bundle.deployment.successors("commands") == ("Mavlink2.0", "WiFi")
    back = apply_rule(radio, rules["toWiFi"], find_matches(rules["toWiFi"], radio)[0])
    assert back.hash == quad_state.hash
    assert back.bundle == quad_state.bundle


def test_binding_must_be_a_match(quad_state, quad_bundle):
    r = rules_by_name(quad_bundle)["toWiFi"]
    with pytest.raises(ApplicationError, match="not a match"):
        apply_rule(quad_state, r, (("Radio", "Radio"), ("WiFi", "WiFi"), ("commands", "commands")))


def test_explore_fixture(quad_state, quad_bundle):
    space = explore(quad_state, quad_bundle.transformation_rules, quad_bundle.invariants)
    assert len(space.states) == 2
    radio = next(h for h in space.states if h != space.initial)
    assert {(t.source, t.rule, t.target) for t in space.transitions} == {
        (space.initial, "toRadio", radio), (radio, "toWiFi", space.initial)}
    assert space.violations == []
    assert not space.exhausted
    assert [t.rule for t in space.path_to(radio)] == ["toRadio"]


def test_buggy_rule_violates_invariant(quad_state, quad_bundle):
    rules = parse_transformation_rules(BUGGY.read_text())
    space = explore(quad_state, rules, quad_bundle.invariants)
    assert [v.invariant for v in space.violations] == ["commands-via-wifi-and-radio"]
    bad = space.states[space.violations[0].state].bundle
    assert bad.deployment.successors("commands") == ("Mavlink2.0", "Radio", "WiFi")


def _tiny():
    df = DataflowGraph((Component("A"), Component("B")), (Channel("ch", {"A"}, {"B"}),))
    dep = DeploymentModel((DeploymentElement("ch", ElementKind.CHANNEL),
                           DeploymentElement("lib", ElementKind.LIBRARY),
                           DeploymentElement("p1", ElementKind.PLATFORM),
                           DeploymentElement("p2", ElementKind.PLATFORM)),
                          frozenset({("ch", "lib"), ("lib", "p1")}))
    return ModelState.of(ModelBundle(df, dep))


def test_variables_and_injectivity():
    s = _tiny()
    r = rule("graph { node ?x:Platform node ?y:Platform }")
    assert find_matches(r, s) == [(("?x", "p1"), ("?y", "p2")), (("?x", "p2"), ("?y", "p1"))]


def test_dataflow_edges_visible():
    g = TypedGraph.of(_tiny().bundle)
    assert ("A", "ch", "sends") in g.edges and ("ch", "B", "receives") in g.edges
    r = rule("graph { node ?s:Component node ?c:Channel edges[(?s->?c:sends)] }")
    assert find_matches(r, _tiny()) == [(("?c", "ch"), ("?s", "A"))]


def test_forbid_groups_are_independent():
    s = _tiny()
    # libraries with no platform dependency: lib depends on p1, so none
    r = rule("graph { node ?l:Library node forbid ?p:Platform edges[(forbid ?l->?p:depends)] }")
    assert find_matches(r, s) == []
    r2 = rule("graph { node ?p:Platform node forbid ?l:Library edges[(forbid ?l->?p:depends)] }")
    assert find_matches(r2, s) == [(("?p", "p2"),)]


def test_forbidden_edge_between_matched_nodes():
    s = _tiny()
    r = rule("graph { node lib:Library node ?p:Platform edges[(forbid lib->?p:depends)] }")
    assert find_matches(r, s) == [(("?p", "p2"), ("lib", "lib"))]


def test_dangling_edge_rejected():
    s = _tiny()
    r = rule("graph { node delete lib:Library }")
    [b] = find_matches(r, s)
    with pytest.raises(ApplicationError, match="dangling"):
        apply_rule(s, r, b)
    ok = rule("graph { node delete p2:Platform }")
    out = apply_rule(s, ok, find_matches(ok, s)[0])
    assert out.bundle.deployment.element("p2") is None


def test_create_existing_rejected():
    s = _tiny()
    r = rule("graph { node create p1:Platform }")
    with pytest.raises(ApplicationError, match="already exists"):
        apply_rule(s, r, ())
    r2 = rule("graph { node ch:Channel node lib:Library edges[(create ch->lib:depends)] }")
    with pytest.raises(ApplicationError, match="already exists"):
        apply_rule(s, r2, find_matches(r2, s)[0])


def test_create_node_and_edges():
    s = _tiny()
    r = rule("graph { node lib:Library node create p3:Platform edges[(create lib->p3:depends)] }")
    out = apply_rule(s, r, find_matches(r, s)[0])
    assert out.bundle.deployment.element("p3").kind is ElementKind.PLATFORM
    assert ("lib", "p3") in out.bundle.deployment.depends


def test_invalid_result_rejected_and_recorded():
    s = _tiny()
    # creating p1 -> lib closes a dependency cycle
    r = rule("graph { node lib:Library node p1:Platform edges[(create p1->lib:depends)] }")
    space = explore(s, [r], max_depth=3)
    assert len(space.states) == 1
    assert len(space.rejected) == 1 and "cycle" in space.rejected[0].reason


def test_state_cap():
    s = _tiny()
    rules = [rule(f"graph {{ node create n{i}:Hardware }}", name=f"mk{i}") for i in range(6)]
    space = explore(s, rules, max_depth=6, state_cap=10)
    assert space.exhausted and len(space.states) == 10


def test_state_cap_env(monkeypatch):
    monkeypatch.setenv("AFTCO_STATE_CAP", "42")
    assert state_cap_from_env() == 42
    monkeypatch.delenv("AFTCO_STATE_CAP")
    assert state_cap_from_env() == 10_000


def test_explore_is_deterministic(quad_state, quad_bundle):
    a = explore(quad_state, quad_bundle.transformation_rules, quad_bundle.invariants)
    b = explore(quad_state, tuple(reversed(quad_bundle.transformation_rules)), quad_bundle.invariants)
    assert a.transitions == b.transitions and list(a.states) == list(b.states)


@settings(max_examples=50, suppress_health_check=[HealthCheck.too_slow], deadline=None)
@given(bundles())
def test_hash_ignores_construction_order(b):
    shuffled = b.replace(fault_trees=tuple(reversed(b.fault_trees)),
                         deployment=DeploymentModel(tuple(reversed(b.deployment.elements)),
                                                    b.deployment.depends))
    assert canonical_hash(shuffled) == canonical_hash(b)


def test_match_pattern_sorted():
    g = TypedGraph.of(_tiny().bundle)
    r = rule("graph { node ?a:Platform }")
    assert [m["?a"] for m in match_pattern(r.pattern, g)] == ["p1", "p2"]


GOLDEN_HASH = "17c91b000426be744fc3b6034ff1e0a62feb3b0a844772cf6cdde80ecc9ec13c"


def test_golden_hash(quad_bundle):
    assert canonical_hash(quad_bundle) == GOLDEN_HASH


def test_zero_node_pattern_matches_once(quad_state):
    assert find_matches(rule("graph { }"), quad_state) == [()]


def test_rule_without_edges_is_noop(quad_state):
    r = rule("graph { node commands:Channel node WiFi:Platform }")
    [b] = find_matches(r, quad_state)
    assert apply_rule(quad_state, r, b).hash == quad_state.hash


def test_to_radio_on_radio_state(quad_state, quad_bundle):
    rules = rules_by_name(quad_bundle)
    radio = apply_rule(quad_state, rules["toRadio"], find_matches(rules["toRadio"], quad_state)[0])
    assert find_matches(rules["toRadio"], radio) == []
    assert radio.hash != quad_state.hash


def test_deleting_wifi_dangles(quad_state):
    r = rule("graph { node commands:Channel node delete WiFi:Platform edges[(commands->WiFi:depends)] }")
    with pytest.raises(ApplicationError, match="dangling"):
        apply_rule(quad_state, r, find_matches(r, quad_state)[0])


def test_no_rules_only_initial(quad_state):
    space = explore(quad_state, [])
    assert list(space.states) == [quad_state.hash] and space.transitions == []
