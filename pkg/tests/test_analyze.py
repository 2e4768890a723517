import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from aftco import kernels
from aftco.analyze import (
    CutSetClass, TooManyLeavesError, brute_force_cut_sets, evaluate, minimal_cut_sets,
    state_space_report, render_text,
)
from aftco.combine import Aft, AftNode, Provenance
from aftco.model import Gate, GateKind, NodeKind, TreeNode
from aftco.pipeline import combine_space
from aftco.transform import explore

from strategies import random_afts

BACKENDS = sorted(kernels.available())


def test_compiled_backend_built():
    assert "cython" in kernels.available()


def _aft(spec, leaves, kinds=None, root="top"):
    """spec: {output: (kind, inputs)}"""
    kinds = kinds or {}
    nodes = [TreeNode(l, l, kinds.get(l, NodeKind.BASIC_EVENT)) for l in leaves]
    nodes += [TreeNode(o, o, NodeKind.INTERMEDIATE_EVENT) for o in spec]
    gates = [Gate(GateKind[k], o, tuple(i)) for o, (k, i) in spec.items()]
    return Aft("t", root, tuple(AftNode(n, Provenance("FaultTree", "t", n.id)) for n in nodes), tuple(gates))


def leaves_of(cut_sets):
    return [sorted(c.leaves) for c in cut_sets]


def test_hand_examples():
    # top = OR(AND(a, b), a) -> {a}
    aft = _aft({"top": ("OR", ["m", "a"]), "m": ("AND", ["a", "b"])}, ["a", "b"])
    assert leaves_of(minimal_cut_sets(aft)) == [["a"]]
    # top = AND(OR(a, b), OR(a, c)) -> {a}, {b, c}
    aft = _aft({"top": ("AND", ["p", "q"]), "p": ("OR", ["a", "b"]), "q": ("OR", ["a", "c"])},
               ["a", "b", "c"])
    assert leaves_of(minimal_cut_sets(aft)) == [["a"], ["b", "c"]]


def test_classification_and_score():
    from aftco import cvss
    vec = cvss.parse("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H")
    nodes = [TreeNode("s", "s", NodeKind.BASIC_ATTACK_STEP, cve_id="CVE-1-1", vector=vec),
             TreeNode("f", "f", NodeKind.BASIC_EVENT),
             TreeNode("g", "g", NodeKind.BASIC_EVENT),
             TreeNode("m", "m", NodeKind.INTERMEDIATE_EVENT),
             TreeNode("top", "top", NodeKind.TOP_EVENT)]
    gates = [Gate(GateKind.OR, "top", ("s", "m", "f")), Gate(GateKind.AND, "m", ("s", "g"))]
    aft = Aft("t", "top", tuple(AftNode(n, Provenance("FaultTree", "t", n.id)) for n in nodes), tuple(gates))
    got = {tuple(sorted(c.leaves)): (c.classification, c.max_exploit_score) for c in minimal_cut_sets(aft)}
    assert got == {("s",): (CutSetClass.ATTACK_ONLY, 9.8), ("f",): (CutSetClass.FAULT_ONLY, None)}
    nodes[0] = TreeNode("s", "s", NodeKind.BASIC_ATTACK_STEP, cve_id="CVE-1-1", vector=vec)
    gates = [Gate(GateKind.AND, "top", ("s", "f"))]
    mixed = Aft("t", "top", tuple(AftNode(n, Provenance("FaultTree", "t", n.id)) for n in nodes
                                  if n.id in ("s", "f", "top")), tuple(gates))
    [c] = minimal_cut_sets(mixed)
    assert c.classification is CutSetClass.MIXED


def test_constants_and_unresolved():
    kinds = {"t": NodeKind.TRUE, "u": NodeKind.EXTERNAL_EVENT}
    aft = _aft({"top": ("OR", ["m", "n"]), "m": ("AND", ["a", "t"]), "n": ("AND", ["b", "u"])},
               ["a", "b", "t", "u"], kinds)
    assert leaves_of(minimal_cut_sets(aft)) == [["a"]]
    always = _aft({"top": ("OR", ["t", "a"])}, ["a", "t"], kinds)
    assert minimal_cut_sets(always) == []
    assert evaluate(always, frozenset())


def test_too_many_leaves():
    leaves = [f"e{i}" for i in range(70)]
    aft = _aft({"top": ("OR", leaves)}, leaves)
    with pytest.raises(TooManyLeavesError, match="70 leaves"):
        minimal_cut_sets(aft)
    assert len(minimal_cut_sets(aft, max_leaves=100)) == 70  # wide trees fall back to Python
    with pytest.raises(TooManyLeavesError):
        brute_force_cut_sets(aft)


@pytest.mark.parametrize("backend", BACKENDS)
@settings(max_examples=150, suppress_health_check=[HealthCheck.too_slow], deadline=None)
@given(aft=random_afts(max_leaves=10))
def test_against_truth_table(backend, aft):
    assert minimal_cut_sets(aft, kernel=kernels.available()[backend]) == brute_force_cut_sets(aft)


masks = st.lists(st.integers(0, 2 ** 64 - 1), max_size=30)


@pytest.mark.skipif("cython" not in kernels.available(), reason="extension not built")
@given(masks, masks)
def test_backends_agree(a, b):
    py, cy = kernels.available()["python"], kernels.available()["cython"]
    assert cy.minimize(a) == py.minimize(a)
    assert cy.union(a, b) == py.union(a, b)
    assert cy.product(a[:10], b[:10]) == py.product(a[:10], b[:10])


@given(masks)
def test_minimize_is_antichain(a):
    out = kernels.impl.minimize(a)
    for x in out:
        assert any(x & m == x for m in a) or not a
        for y in out:
            assert x == y or (x & y) != x


def test_pure_python_env(monkeypatch):
    import importlib
    monkeypatch.setenv("AFTCO_PURE_PYTHON", "1")
    mod = importlib.reload(kernels)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("AFTCO_PURE_PYTHON")
        importlib.reload(kernels)


def test_report_fixture(quad_state, quad_bundle, records):
    space = explore(quad_state, quad_bundle.transformation_rules, quad_bundle.invariants)
    report = state_space_report(space, combine_space(space, records))
    assert report.attack_only_exposure
    radio = next(h for h in space.states if h != space.initial)
    assert {(e.state, tuple(sorted(e.cut_set.leaves))) for e in report.exposures} == {
        (radio, ("at:AT-Mavlink2.0/CVE-2099-0001",)), (radio, ("at:AT-Mavlink2.0/CVE-2099-0002",))}
    assert [p["rule"] for p in report.exposures[0].path] == ["toRadio"]
    text = render_text(report)
    assert "via toRadio" in text and "invariant violations:\n  none" in text
    as_json = report.to_json()
    assert as_json["attack_only_exposure"] is True
    assert [a["node"].rsplit("@", 1)[1] for a in as_json["assumptions"]] == ["WPA2"]


def test_report_requires_every_state(quad_state, quad_bundle):
    space = explore(quad_state, quad_bundle.transformation_rules, quad_bundle.invariants)
    with pytest.raises(ValueError, match="no AFTs"):
        state_space_report(space, {})


def test_spec_shapes():
    aft = _aft({"top": ("OR", ["a", "m"]), "m": ("AND", ["b", "c"])}, ["a", "b", "c"])
    assert leaves_of(minimal_cut_sets(aft)) == [["a"], ["b", "c"]] == leaves_of(brute_force_cut_sets(aft))
    aft = _aft({"top": ("AND", ["a", "m"]), "m": ("OR", ["a", "b"])}, ["a", "b"])
    assert leaves_of(minimal_cut_sets(aft)) == [["a"]]
    aft = _aft({"top": ("OR", ["a"])}, ["a"])
    assert leaves_of(brute_force_cut_sets(aft)) == [["a"]]


def test_single_state_report_has_no_exposure(quad_state, records):
    space = explore(quad_state, [])
    report = state_space_report(space, combine_space(space, records))
    assert report.exposures == [] and not report.attack_only_exposure


def test_violation_echoed_with_binding(quad_state, quad_bundle):
    from aftco.dsl import parse_transformation_rules
    from conftest import BUGGY
    space = explore(quad_state, parse_transformation_rules(BUGGY.read_text()), quad_bundle.invariants)
    report = state_space_report(space, combine_space(space))
    [v] = report.violations
    assert v["invariant"] == "commands-via-wifi-and-radio"
    assert v["binding"] == {"Radio": "Radio", "WiFi": "WiFi", "commands": "commands"}
