"""Deployment closure, combination-rule matching and AFT assembly."""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import cvss
from .cvss import impact_satisfies
from .dsl import node_from_json, node_to_json, requirement_from_json, requirement_to_json
from .model import (
    AttackTree, CombinationRule, DeploymentModel, Direction, ElementKind,
    FaultTree, Gate, GateKind, ImpactRequirement, NodeKind, Resolution,
    ResolutionKind, Tree, TreeNode,
)
from .transform import Binding, ModelState, TypedGraph, as_binding, match_pattern

CONSTITUENT_KINDS = frozenset({ElementKind.PROTOCOL, ElementKind.PLATFORM, ElementKind.HARDWARE})


class UnknownElementError(KeyError):
    pass


class AftCycleError(RuntimeError):
    def __init__(self, cycle: Sequence[str]):
        super().__init__("cycle between model sources: " + " -> ".join(cycle))
        self.cycle = list(cycle)


def transitive_deps(deployment: DeploymentModel, name: str) -> List[str]:
    """Everything reachable from ``name`` over >= 1 depends edge, sorted."""
    if deployment.element(name) is None:
        raise UnknownElementError(name)
    succ: Dict[str, List[str]] = {}
    for a, b in deployment.depends:
        succ.setdefault(a, []).append(b)
    seen = set()
    queue = deque(succ.get(name, ()))
    while queue:
        cur = queue.popleft()
        if cur in seen:
            continue
        seen.add(cur)
        queue.extend(succ.get(cur, ()))
    seen.discard(name)
    return sorted(seen)


# ---------------------------------------------------------------------------
# fragment instances

@dataclass(frozen=True)
class BoundPort:
    node: str
    target: str
    requirement: ImpactRequirement
    resolution: Resolution


@dataclass(frozen=True)
class FragmentInstance:
    rule: str
    source: str
    binding: Binding
    root: str
    target: str
    caused: ImpactRequirement
    nodes: Tuple[TreeNode, ...]
    gates: Tuple[Gate, ...]
    ports: Tuple[BoundPort, ...]

    @property
    def key(self) -> str:
        return instance_key(self.rule, self.binding)


def instance_key(rule: str, binding: Binding) -> str:
    return f"{rule}(" + ", ".join(f"{k}={v}" for k, v in binding) + ")"


_PLACEHOLDER = re.compile(r"\{(\?[^{}]+)\}")


def _fill(label: str, binding: Dict[str, str]) -> str:
    return _PLACEHOLDER.sub(lambda m: binding.get(m.group(1), m.group(0)), label)


def instantiate(rule: CombinationRule, binding: Dict[str, str], deployment: DeploymentModel
                ) -> FragmentInstance:
    b = as_binding(binding)
    prefix = f"cr:{instance_key(rule.name, b)}/"
    ports = {p.id: p for p in rule.ports}
    nodes: List[TreeNode] = []
    gates = [Gate(g.kind, prefix + g.output, tuple(prefix + i for i in g.inputs))
             for g in rule.fragment.gates]
    bound: List[BoundPort] = []
    root_port = ports[rule.fragment.root]
    for n in rule.fragment.nodes:
        nid = prefix + n.id
        label = _fill(n.label, binding)
        port = ports.get(n.id)
        if port is None:
            nodes.append(TreeNode(nid, label, n.kind))
            continue
        target = binding[port.var]
        if port.direction is Direction.CAUSES:
            nodes.append(TreeNode(nid, label, NodeKind.PORT, target=target,
                                  requirement=port.requirement, direction=Direction.CAUSES))
            continue
        res = port.resolution
        if res.kind is ResolutionKind.CONSTITUENTS:
            try:
                members = [m for m in transitive_deps(deployment, target)
                           if deployment.element(m) is not None
                           and deployment.element(m).kind in CONSTITUENT_KINDS]
            except UnknownElementError:
                members = []
            if members:
                subs = []
                for m in members:
                    sid = f"{nid}@{m}"
                    subs.append(sid)
                    nodes.append(TreeNode(sid, f"{label}: {m}", NodeKind.PORT, target=m,
                                          requirement=port.requirement, direction=Direction.REQUIRES))
                    bound.append(BoundPort(sid, m, port.requirement, res.inner))
                nodes.append(TreeNode(nid, label, NodeKind.INTERMEDIATE_EVENT, target=target))
                gates.append(Gate(GateKind.AND, nid, tuple(subs)))
                continue
        nodes.append(TreeNode(nid, label, NodeKind.PORT, target=target,
                              requirement=port.requirement, direction=Direction.REQUIRES))
        bound.append(BoundPort(nid, target, port.requirement, res))
    return FragmentInstance(rule.name, rule.source, b, prefix + rule.fragment.root,
                            binding[root_port.var], root_port.requirement,
                            tuple(nodes), tuple(gates), tuple(bound))


def match_combination_rules(rules: Iterable[CombinationRule], state: ModelState) -> List[FragmentInstance]:
    graph = TypedGraph.of(state.bundle)
    out = []
    for rule in sorted(rules, key=lambda r: r.name):
        for binding in match_pattern(rule.pattern, graph):
            out.append(instantiate(rule, binding, state.bundle.deployment))
    return out


# ---------------------------------------------------------------------------
# assembled trees

@dataclass(frozen=True)
class Provenance:
    source: str  # FaultTree | AttackTree | CombinationRule
    name: str
    element: str
    binding: Binding = ()

    def __str__(self) -> str:
        if self.binding:
            return f"{self.source} {instance_key(self.name, self.binding)} node {self.element}"
        return f"{self.source} {self.name} node {self.element}"


@dataclass(frozen=True)
class AftNode:
    node: TreeNode
    provenance: Provenance

    @property
    def id(self) -> str:
        return self.node.id

    @property
    def kind(self) -> NodeKind:
        return self.node.kind

    @property
    def label(self) -> str:
        return self.node.label


@dataclass(frozen=True)
class Unresolved:
    node: str
    target: str
    reason: str


@dataclass(frozen=True)
class Aft:
    name: str
    root: str
    nodes: Tuple[AftNode, ...]
    gates: Tuple[Gate, ...]
    unresolved: Tuple[Unresolved, ...] = ()

    @cached_property
    def node_index(self) -> Dict[str, AftNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def gate_index(self) -> Dict[str, Gate]:
        return {g.output: g for g in self.gates}

    def node(self, node_id: str) -> AftNode:
        return self.node_index[node_id]

    def gate_for(self, node_id: str) -> Optional[Gate]:
        return self.gate_index.get(node_id)

    def leaves(self) -> List[AftNode]:
        return [n for n in self.nodes if n.id not in self.gate_index]


@dataclass(frozen=True)
class _Source:
    kind: str  # attack | fragment | fault
    key: str
    target: str
    caused: ImpactRequirement


_SINK_KINDS = {
    ResolutionKind.ATTACK_ROOT: {"attack", "fragment"},
    ResolutionKind.ATTRIBUTE_TRUE: {"attack", "fragment"},
    ResolutionKind.FAULT_EVENT: {"fault", "fragment"},
}
_ALL_KINDS = {"attack", "fragment", "fault"}
_KIND_ORDER = {"fault": 0, "attack": 1, "fragment": 2}


class _Builder:
    def __init__(self, state: ModelState, fragments: Sequence[FragmentInstance],
                 attack_trees: Sequence[AttackTree]):
        bundle = state.bundle
        self.deployment = bundle.deployment
        self.fault_trees = {t.name: t for t in bundle.fault_trees}
        self.attack_trees = {t.name: t for t in attack_trees}
        self.fragments = {f.key: f for f in fragments}
        index: Dict[str, List[_Source]] = {}
        for t in bundle.fault_trees:
            top = t.node(t.root)
            if top.target is not None and top.direction is Direction.CAUSES:
                index.setdefault(top.target, []).append(
                    _Source("fault", t.name, top.target, top.requirement or ImpactRequirement()))
        for t in attack_trees:
            r = t.node(t.root)
            index.setdefault(r.target, []).append(
                _Source("attack", t.name, r.target, r.requirement or ImpactRequirement()))
        for f in fragments:
            index.setdefault(f.target, []).append(_Source("fragment", f.key, f.target, f.caused))
        for v in index.values():
            v.sort(key=lambda s: (_KIND_ORDER[s.kind], s.key))
        self.index = index
        self.known = {el.name for el in bundle.deployment.elements} | {
            c.name for c in bundle.dataflow.components} | {c.name for c in bundle.dataflow.channels}
        self.nodes: Dict[str, AftNode] = {}
        self.gates: Dict[str, Gate] = {}
        self.unresolved: List[Unresolved] = []
        self.roots: Dict[Tuple[str, str], str] = {}
        self.stack: List[Tuple[str, str]] = []

    def build(self, tree: FaultTree) -> Aft:
        root = self.materialize(_Source("fault", tree.name, "", ImpactRequirement()))
        return Aft(tree.name, root, tuple(self.nodes.values()), tuple(self.gates.values()),
                   tuple(self.unresolved))

    def materialize(self, src: _Source) -> str:
        key = (src.kind, src.key)
        if key in self.roots:
            return self.roots[key]
        if key in self.stack:
            names = [k for _, k in self.stack[self.stack.index(key):]] + [src.key]
            raise AftCycleError(names)
        self.stack.append(key)
        if src.kind == "fragment":
            root = self._add_fragment(self.fragments[src.key])
        elif src.kind == "attack":
            root = self._add_tree(self.attack_trees[src.key], "AttackTree", "at")
        else:
            root = self._add_tree(self.fault_trees[src.key], "FaultTree", "ft")
        self.stack.pop()
        self.roots[key] = root
        return root

    def _add_tree(self, tree: Tree, source: str, tag: str) -> str:
        prefix = f"{tag}:{tree.name}/"
        ids = {}
        for n in tree.nodes:
            if n.kind is NodeKind.BASIC_ATTACK_STEP:
                ids[n.id] = prefix + n.cve_id
            else:
                ids[n.id] = prefix + n.id
        for n in tree.nodes:
            nid = ids[n.id]
            if nid not in self.nodes:
                self.nodes[nid] = AftNode(_renamed(n, nid), Provenance(source, tree.name, n.id))
        for g in tree.gates:
            self.gates[ids[g.output]] = Gate(g.kind, ids[g.output], tuple(ids[i] for i in g.inputs))
        own = (("fault" if source == "FaultTree" else "attack"), tree.name)
        for n in tree.leaves():
            if n.kind is NodeKind.EXTERNAL_EVENT and n.direction is Direction.REQUIRES:
                self._connect(ids[n.id], n.target, n.requirement or ImpactRequirement(),
                              _ALL_KINDS, own, attribute=None)
        return ids[tree.root]

    def _add_fragment(self, frag: FragmentInstance) -> str:
        for n in frag.nodes:
            self.nodes[n.id] = AftNode(n, Provenance("CombinationRule", frag.rule,
                                                     n.id.rsplit("/", 1)[-1], frag.binding))
        for g in frag.gates:
            self.gates[g.output] = g
        own = ("fragment", frag.key)
        for p in frag.ports:
            res = p.resolution
            if res.kind is ResolutionKind.CONSTITUENTS:
                self._unresolve(p.node, p.target, "no protocol/platform/hardware constituents")
                continue
            attr = res.attribute if res.kind is ResolutionKind.ATTRIBUTE_TRUE else None
            self._connect(p.node, p.target, p.requirement, _SINK_KINDS[res.kind], own, attr)
        return frag.root

    def _unresolve(self, node_id, target, reason):
        self.unresolved.append(Unresolved(node_id, target, reason))

    def _connect(self, node_id, target, requirement, kinds, own, attribute):
        if attribute is not None:
            el = self.deployment.element(target)
            if el is not None and el.attr(attribute) == "true":
                old = self.nodes[node_id]
                self.nodes[node_id] = AftNode(_with_kind(old.node, NodeKind.TRUE), old.provenance)
                return
        if target not in self.known:
            self._unresolve(node_id, target, f"unknown target {target!r}")
            return
        sources = [s for s in self.index.get(target, ())
                   if s.kind in kinds and (s.kind, s.key) != own
                   and impact_satisfies(s.caused, requirement)]
        if not sources:
            what = f"{attribute!r} not set and no compatible source" if attribute else "no compatible source"
            self._unresolve(node_id, target, what)
            return
        inputs = tuple(self.materialize(s) for s in sources)
        self.gates[node_id] = Gate(GateKind.OR, node_id, inputs)


def _renamed(n: TreeNode, nid: str) -> TreeNode:
    from dataclasses import replace
    return replace(n, id=nid)


def _with_kind(n: TreeNode, kind: NodeKind) -> TreeNode:
    from dataclasses import replace
    return replace(n, kind=kind)


def assemble_aft(state: ModelState, fragments: Sequence[FragmentInstance],
                 attack_trees: Optional[Sequence[AttackTree]] = None) -> List[Aft]:
    """One combined tree per fault tree of ``state``."""
    if attack_trees is None:
        attack_trees = state.bundle.attack_trees
    return [_Builder(state, fragments, attack_trees).build(ft) for ft in state.bundle.fault_trees]


def combine_state(state: ModelState, attack_trees: Optional[Sequence[AttackTree]] = None) -> List[Aft]:
    fragments = match_combination_rules(state.bundle.combination_rules, state)
    return assemble_aft(state, fragments, attack_trees)


# ---------------------------------------------------------------------------
# export

def aft_to_json(aft: Aft) -> dict:
    nodes = []
    for n in aft.nodes:
        d = node_to_json(n.node)
        p = n.provenance
        d["provenance"] = {"source": p.source, "name": p.name, "element": p.element,
                           "binding": {k: v for k, v in p.binding}}
        nodes.append(d)
    return {"name": aft.name, "root": aft.root, "nodes": nodes,
            "gates": [{"kind": g.kind.value, "output": g.output, "inputs": list(g.inputs)}
                      for g in aft.gates],
            "unresolved": [{"node": u.node, "target": u.target, "reason": u.reason}
                           for u in aft.unresolved]}


def aft_from_json(d) -> Aft:
    nodes = []
    for nd in d["nodes"]:
        p = nd.get("provenance", {})
        prov = Provenance(p.get("source", ""), p.get("name", ""), p.get("element", ""),
                          tuple(sorted(p.get("binding", {}).items())))
        nodes.append(AftNode(node_from_json(nd), prov))
    gates = tuple(Gate(GateKind(g["kind"]), g["output"], tuple(g["inputs"])) for g in d["gates"])
    unresolved = tuple(Unresolved(u["node"], u["target"], u["reason"]) for u in d.get("unresolved", ()))
    return Aft(d["name"], d["root"], tuple(nodes), gates, unresolved)


_SHAPES = {
    NodeKind.TOP_EVENT: "box",
    NodeKind.INTERMEDIATE_EVENT: "box",
    NodeKind.BASIC_EVENT: "ellipse",
    NodeKind.BASIC_ATTACK_STEP: "ellipse",
    NodeKind.EXTERNAL_EVENT: "house",
    NodeKind.PORT: "box",
    NodeKind.TRUE: "plaintext",
}


def _esc(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def aft_to_dot(aft: Aft) -> str:
    ids = {n.id: f"n{i}" for i, n in enumerate(aft.nodes)}
    unresolved = {u.node for u in aft.unresolved}
    lines = [f'digraph "{_esc(aft.name)}" {{', "  rankdir=TB;", '  node [fontname="Helvetica"];']
    for n in aft.nodes:
        text = [n.label]
        attrs = {"shape": _SHAPES[n.kind], "tooltip": str(n.provenance)}
        if n.kind is NodeKind.BASIC_ATTACK_STEP:
            attrs["color"] = "red"
            if n.node.vector is not None:
                text.append(cvss.serialize(n.node.vector))
        if n.kind is NodeKind.TRUE:
            text[0] = f"TRUE: {n.label}"
        if n.id in unresolved:
            attrs["style"] = "dashed"
            attrs["color"] = "grey"
        if n.provenance.source == "CombinationRule":
            attrs.setdefault("color", "black")
        # escape each line, then join with DOT's \n line break
        label = "\\n".join(_esc(t) for t in text)
        body = ", ".join([f'label="{label}"'] + [f'{k}="{_esc(v)}"' for k, v in attrs.items()])
        lines.append(f"  {ids[n.id]} [{body}];")
    for i, g in enumerate(aft.gates):
        gid = f"g{i}"
        shape = "invhouse" if g.kind is GateKind.AND else "invtriangle"
        lines.append(f'  {gid} [label="{g.kind.value}", shape={shape}, width=0.4, height=0.4];')
        lines.append(f"  {ids[g.output]} -> {gid} [dir=back];")
        for inp in g.inputs:
            lines.append(f"  {gid} -> {ids[inp]} [dir=back];")
    lines.append("}")
    return "\n".join(lines) + "\n"
