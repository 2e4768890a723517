import re

import pytest
from hypothesis import given, settings

from aftco.combine import (
    AftCycleError, UnknownElementError, aft_from_json, aft_to_dot, aft_to_json, assemble_aft,
    combine_state, match_combination_rules, transitive_deps,
)
from aftco.model import (
    DeploymentElement, DeploymentModel, Direction, ElementKind, FaultTree, Gate, GateKind,
    ImpactLevel, ImpactRequirement, ModelBundle, NodeKind, TreeNode,
)
from aftco.pipeline import attack_trees_for
from aftco.transform import ModelState, apply_rule, find_matches

from strategies import random_dags

CAPEC115 = "cr:capec-115-authentication-bypass(?ch=commands)/constituents"


def naive_closure(dep, name):
    reach = {b for a, b in dep.depends if a == name}
    while True:
        new = reach | {b for a, b in dep.depends if a in reach}
        if new == reach:
            return sorted(reach - {name})
        reach = new


def test_commands_closure(quad_bundle):
    deps = transitive_deps(quad_bundle.deployment, "commands")
    assert deps == sorted(deps)
    assert {"Mavlink2.0", "MavlinkLib", "IEEE 802.11n", "WPA2", "UDP", "TCP/IP", "UART"} <= set(deps)
    assert deps == naive_closure(quad_bundle.deployment, "commands")


def test_closure_edge_cases():
    dep = DeploymentModel((DeploymentElement("a", ElementKind.LIBRARY),))
    assert transitive_deps(dep, "a") == []
    with pytest.raises(UnknownElementError):
        transitive_deps(dep, "zzz")


@settings(max_examples=60, deadline=None)
@given(random_dags(max_nodes=60))
def test_closure_matches_fixpoint(dep):
    for el in dep.elements[:10]:
        assert transitive_deps(dep, el.name) == naive_closure(dep, el.name)


def test_fixture_fragment_instances(quad_state):
    keys = [f.key for f in match_combination_rules(quad_state.bundle.combination_rules, quad_state)]
    assert keys == [
        "capec-115-authentication-bypass(?ch=commands)",
        "capec-115-authentication-bypass(?ch=telemetry)",
        "capec-594-traffic-injection(?ch=commands)",
        "capec-594-traffic-injection(?ch=telemetry)",
        "cwe-20-improper-input-validation(?a=PX4, ?b=mavros_node, ?ch=telemetry)",
        "cwe-20-improper-input-validation(?a=mavros_node, ?b=PX4, ?ch=commands)",
    ]


def _radio(state):
    rule = next(r for r in state.bundle.transformation_rules if r.name == "toRadio")
    return apply_rule(state, rule, find_matches(rule, state)[0])


def _aft(state, records):
    trees, _ = attack_trees_for(state, records)
    [aft] = combine_state(state, trees)
    return aft


def test_wifi_state_blocked_by_wpa2(quad_state, records):
    aft = _aft(quad_state, records)
    assert [u.node for u in aft.unresolved] == [CAPEC115 + "@WPA2"]
    # unauthenticated constituents resolve to constant true
    assert aft.node(CAPEC115 + "@UDP").kind is NodeKind.TRUE
    # the authenticated protocol needs the attack tree
    assert aft.gate_for(CAPEC115 + "@Mavlink2.0").inputs == ("at:AT-Mavlink2.0/root",)


def test_radio_state_links_attack_tree(quad_state, records):
    aft = _aft(_radio(quad_state), records)
    assert aft.unresolved == ()
    members = [i.split("@", 1)[1] for i in aft.gate_for(CAPEC115).inputs]
    assert members == ["Mavlink2.0", "Radio", "UART", "UDP"]
    assert aft.gate_for("at:AT-Mavlink2.0/root").inputs == (
        "at:AT-Mavlink2.0/CVE-2099-0001", "at:AT-Mavlink2.0/CVE-2099-0002")
    assert aft.node("ft:FT-LossOfControl/loss").label == "Loss of control"


def test_provenance(quad_state, records):
    aft = _aft(_radio(quad_state), records)
    for n in aft.nodes:
        tag = n.id.split(":", 1)[0]
        assert {"ft": "FaultTree", "at": "AttackTree", "cr": "CombinationRule"}[tag] == n.provenance.source
    step = aft.node("at:AT-Mavlink2.0/CVE-2099-0001")
    assert (step.provenance.name, step.provenance.element) == ("AT-Mavlink2.0", "CVE-2099-0001")


def _ext(nid, target, direction):
    return TreeNode(nid, nid, NodeKind.EXTERNAL_EVENT, target=target,
                    requirement=ImpactRequirement(), direction=direction)


def _ft(name, causes, requires):
    top = TreeNode("top", name, NodeKind.TOP_EVENT, target=causes, requirement=ImpactRequirement(),
                   direction=Direction.CAUSES)
    return FaultTree(name, "top", (top, _ext("x", requires, Direction.REQUIRES)),
                     (Gate(GateKind.OR, "top", ("x",)),))


def _state(*trees):
    dep = DeploymentModel((DeploymentElement("A", ElementKind.LIBRARY),
                           DeploymentElement("B", ElementKind.LIBRARY)))
    return ModelState.of(ModelBundle(deployment=dep, fault_trees=trees))


def test_cycle_detected():
    with pytest.raises(AftCycleError) as info:
        assemble_aft(_state(_ft("F1", "A", "B"), _ft("F2", "B", "A")), [])
    assert info.value.cycle[0] == info.value.cycle[-1] == "F1"


def test_source_never_feeds_itself():
    [aft] = assemble_aft(_state(_ft("F1", "A", "A")), [])
    assert [u.node for u in aft.unresolved] == ["ft:F1/x"]


def test_cascade_between_fault_trees():
    afts = assemble_aft(_state(_ft("F1", "A", "B"), _ft("F2", "B", "none")), [])
    f1 = next(a for a in afts if a.name == "F1")
    assert f1.gate_for("ft:F1/x").inputs == ("ft:F2/top",)


def test_requirement_filters_sources():
    weak = FaultTree("F2", "top", (
        TreeNode("top", "t", NodeKind.TOP_EVENT, target="B",
                 requirement=ImpactRequirement(integrity=ImpactLevel.LOW), direction=Direction.CAUSES),
        TreeNode("e", "e", NodeKind.BASIC_EVENT)), (Gate(GateKind.OR, "top", ("e",)),))
    strict = FaultTree("F1", "top", (
        TreeNode("top", "t", NodeKind.TOP_EVENT),
        TreeNode("x", "x", NodeKind.EXTERNAL_EVENT, target="B",
                 requirement=ImpactRequirement(integrity=ImpactLevel.HIGH), direction=Direction.REQUIRES)),
        (Gate(GateKind.OR, "top", ("x",)),))
    f1 = next(a for a in assemble_aft(_state(strict, weak), []) if a.name == "F1")
    assert [u.node for u in f1.unresolved] == ["ft:F1/x"]


def test_json_roundtrip_and_dot(quad_state, records):
    aft = _aft(_radio(quad_state), records)
    again = aft_from_json(aft_to_json(aft))
    assert again == aft
    dot = aft_to_dot(aft)
    assert dot.startswith('digraph "FT-LossOfControl" {') and dot.rstrip().endswith("}")
    # every quote in the file is either escaped or balanced on its line
    for line in dot.splitlines():
        assert len(re.findall(r'(?<!\\)"', line)) % 2 == 0, line
    assert "invhouse" in dot and "invtriangle" in dot


def test_dot_escapes_awkward_labels():
    ft = FaultTree("F", "top", (TreeNode("top", 'say "hi" \\', NodeKind.TOP_EVENT),
                                TreeNode("e", "e", NodeKind.BASIC_EVENT)),
                   (Gate(GateKind.OR, "top", ("e",)),))
    [aft] = assemble_aft(_state(ft), [])
    line = next(l for l in aft_to_dot(aft).splitlines() if "say" in l)
    assert 'label="say \\"hi\\" \\\\"' in line


def test_capec_594_per_channel(quad_state):
    frags = [f for f in match_combination_rules(quad_state.bundle.combination_rules, quad_state)
             if f.rule == "capec-594-traffic-injection"]
    labels = {f.target: {n.id.rsplit("/", 1)[1]: n.label for n in f.nodes} for f in frags}
    assert labels["commands"]["inject"] == "spoofed message inserted into commands"
    assert labels["telemetry"]["noauth"] == "telemetry requires no authentication"


def test_rule_matching_nothing(quad_state):
    from aftco.dsl import combination_rule_from_json
    from aftco.dsl import combination_rule_to_json
    r = quad_state.bundle.combination_rules[0]
    d = combination_rule_to_json(r)
    d["pattern"]["nodes"][0]["kind"] = "Proxy"
    assert match_combination_rules([combination_rule_from_json(d)], quad_state) == []


def test_plain_fault_tree_unchanged():
    ft = FaultTree("F", "top", (TreeNode("top", "t", NodeKind.TOP_EVENT),
                                TreeNode("a", "a", NodeKind.BASIC_EVENT),
                                TreeNode("b", "b", NodeKind.BASIC_EVENT)),
                   (Gate(GateKind.AND, "top", ("a", "b")),))
    [aft] = assemble_aft(_state(ft), [])
    assert sorted(n.id for n in aft.nodes) == ["ft:F/a", "ft:F/b", "ft:F/top"]
    assert [(g.kind, g.output, g.inputs) for g in aft.gates] == [(GateKind.AND, "ft:F/top", ("ft:F/a", "ft:F/b"))]
    assert aft.unresolved == ()
