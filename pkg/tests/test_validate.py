from hypothesis import given

from aftco.model import (
    Channel, Component, DataflowGraph, DeploymentElement, DeploymentModel, Direction,
    ElementKind, FaultTree, Gate, GateKind, ImpactRequirement, ModelBundle, NodeKind, TreeNode,
)
from aftco.validate import Severity, errors, find_cycle, validate_bundle

from strategies import bundles


def rules_of(diags):
    return {d.rule for d in diags}


def test_fixture_is_clean(quad_bundle):
    assert validate_bundle(quad_bundle) == []


def test_channel_sender_not_a_component():
    df = DataflowGraph((Component("A"),), (Channel("ch", {"A"}, {"B"}),))
    diags = validate_bundle(ModelBundle(dataflow=df))
    assert [(d.element, d.rule) for d in diags] == [("ch", "receiver-resolves")]


def test_dependency_cycle_reported():
    dep = DeploymentModel((DeploymentElement("a", ElementKind.LIBRARY),
                           DeploymentElement("b", ElementKind.LIBRARY)),
                          frozenset({("a", "b"), ("b", "a")}))
    diags = validate_bundle(ModelBundle(deployment=dep))
    assert "depends-acyclic" in rules_of(diags)


def test_undeclared_dependency_and_mirror():
    dep = DeploymentModel((DeploymentElement("PX4", ElementKind.COMPONENT),),
                          frozenset({("PX4", "ghost")}))
    diags = validate_bundle(ModelBundle(deployment=dep))
    assert {"depends-resolves", "dataflow-mirror"} <= rules_of(diags)


def test_proxy_instantiated_twice():
    els = (DeploymentElement("net", ElementKind.PROXY), DeploymentElement("p1", ElementKind.PLATFORM),
           DeploymentElement("p2", ElementKind.PLATFORM))
    dep = DeploymentModel(els, frozenset({("net", "p1"), ("net", "p2")}))
    assert "proxy-instantiation" in rules_of(validate_bundle(ModelBundle(deployment=dep)))


def _ft(nodes, gates, root="top"):
    return FaultTree("FT", root, tuple(nodes), tuple(gates))


def test_shared_subtree_rejected():
    nodes = [TreeNode("top", "t", NodeKind.TOP_EVENT), TreeNode("m", "m", NodeKind.INTERMEDIATE_EVENT),
             TreeNode("e", "e", NodeKind.BASIC_EVENT)]
    gates = [Gate(GateKind.OR, "top", ("m", "e")), Gate(GateKind.AND, "m", ("e",))]
    assert "tree-shape" in rules_of(validate_bundle(ModelBundle(fault_trees=(_ft(nodes, gates),))))


def test_unknown_target_is_only_a_warning():
    nodes = [TreeNode("top", "t", NodeKind.TOP_EVENT),
             TreeNode("x", "x", NodeKind.EXTERNAL_EVENT, target="nowhere",
                      requirement=ImpactRequirement(), direction=Direction.REQUIRES)]
    diags = validate_bundle(ModelBundle(fault_trees=(_ft(nodes, [Gate(GateKind.OR, "top", ("x",))]),)))
    assert [d.severity for d in diags] == [Severity.WARNING]
    assert errors(diags) == []


def test_fault_tree_rejects_attack_steps_and_causes_leaves():
    nodes = [TreeNode("top", "t", NodeKind.TOP_EVENT),
             TreeNode("x", "x", NodeKind.EXTERNAL_EVENT, target="A",
                      requirement=ImpactRequirement(), direction=Direction.CAUSES),
             TreeNode("s", "s", NodeKind.BASIC_ATTACK_STEP)]
    diags = validate_bundle(ModelBundle(fault_trees=(_ft(nodes, [Gate(GateKind.OR, "top", ("x", "s"))]),)))
    assert {"external-direction", "fault-node-kind", "attack-step"} <= rules_of(diags)


def test_find_cycle():
    assert find_cycle(["a", "b", "c"], [("a", "b"), ("b", "c")]) is None
    cyc = find_cycle(["a", "b", "c"], [("a", "b"), ("b", "c"), ("c", "a")])
    assert cyc[0] == cyc[-1] and set(cyc) == {"a", "b", "c"}


@given(bundles())
def test_validation_is_deterministic(b):
    assert validate_bundle(b) == validate_bundle(b)


def test_collections_normalised():
    a = DataflowGraph((Component("b"), Component("a")))
    b = DataflowGraph((Component("a"), Component("b")))
    assert a == b and hash(a) == hash(b)
