"""Cross-model referential and structural validation."""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import List

from .model import (
    DATAFLOW_KINDS, TREE_NODE_KINDS, AttackTree, Direction, ElementKind,
    ModelBundle, NodeKind, Tree, element_names,
)


class Severity(enum.Enum):
    ERROR = "Error"
    WARNING = "Warning"


@dataclass(frozen=True)
class Diagnostic:
    element: str
    rule: str
    severity: Severity
    message: str = ""

    def __str__(self) -> str:
        return f"{self.severity.value}: {self.element}: [{self.rule}] {self.message}"


def errors(diagnostics) -> List[Diagnostic]:
    return [d for d in diagnostics if d.severity is Severity.ERROR]


def find_cycle(nodes, edges):
    """Return one cycle (list of names, first repeated last) or None."""
    succ = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    for k in succ:
        succ[k].sort()
    WHITE, GREY, BLACK = 0, 1, 2
    colour = dict.fromkeys(set(nodes) | set(succ), WHITE)
    for start in sorted(colour):
        if colour[start] != WHITE:
            continue
        stack = [(start, iter(succ.get(start, ())))]
        path = [start]
        colour[start] = GREY
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = BLACK
                stack.pop()
                path.pop()
            elif colour.get(nxt, WHITE) == GREY:
                return path[path.index(nxt):] + [nxt]
            elif colour.get(nxt, WHITE) == WHITE:
                colour[nxt] = GREY
                stack.append((nxt, iter(succ.get(nxt, ()))))
                path.append(nxt)
    return None


def _check_dataflow(bundle, out):
    df = bundle.dataflow
    names = Counter([c.name for c in df.components] + [c.name for c in df.channels])
    for name, n in sorted(names.items()):
        if n > 1:
            out.append(Diagnostic(name, "unique-name", Severity.ERROR,
                                  "name used by more than one dataflow element"))
    comps = df.component_names()
    for ch in df.channels:
        if not ch.senders:
            out.append(Diagnostic(ch.name, "channel-senders", Severity.ERROR, "channel has no sender"))
        if not ch.receivers:
            out.append(Diagnostic(ch.name, "channel-receivers", Severity.ERROR, "channel has no receiver"))
        for role, members in (("sender", ch.senders), ("receiver", ch.receivers)):
            for m in sorted(members):
                if m not in comps:
                    out.append(Diagnostic(ch.name, f"{role}-resolves", Severity.ERROR,
                                          f"{role} {m!r} is not a component"))


def _check_deployment(bundle, out):
    dep = bundle.deployment
    df = bundle.dataflow
    counts = Counter(el.name for el in dep.elements)
    for name, n in sorted(counts.items()):
        if n > 1:
            out.append(Diagnostic(name, "unique-name", Severity.ERROR,
                                  "deployment element defined more than once"))
    known = dep.names()
    for a, b in sorted(dep.depends):
        for end in (a, b):
            if end not in known:
                out.append(Diagnostic(end, "depends-resolves", Severity.ERROR,
                                      f"depends edge {a} -> {b} names an undeclared element"))
    cycle = find_cycle(known, dep.depends)
    if cycle:
        out.append(Diagnostic(cycle[0], "depends-acyclic", Severity.ERROR,
                              "dependency cycle: " + " -> ".join(cycle)))
    comps = df.component_names()
    chans = {c.name for c in df.channels}
    for el in dep.elements:
        if el.kind is ElementKind.COMPONENT and el.name not in comps:
            out.append(Diagnostic(el.name, "dataflow-mirror", Severity.ERROR,
                                  "Component element has no dataflow component"))
        elif el.kind is ElementKind.CHANNEL and el.name not in chans:
            out.append(Diagnostic(el.name, "dataflow-mirror", Severity.ERROR,
                                  "Channel element has no dataflow channel"))
        elif el.kind not in DATAFLOW_KINDS and (el.name in comps or el.name in chans):
            out.append(Diagnostic(el.name, "dataflow-mirror", Severity.ERROR,
                                  f"{el.kind.value} element shares a name with a dataflow element"))
        if el.kind is ElementKind.PROXY:
            inst = [b for a, b in dep.depends if a == el.name
                    and (dep.element(b) is not None and dep.element(b).kind is ElementKind.PLATFORM)]
            if len(inst) > 1:
                out.append(Diagnostic(el.name, "proxy-instantiation", Severity.ERROR,
                                      "proxy instantiated more than once: " + ", ".join(sorted(inst))))


def check_tree(tree: Tree, is_attack: bool):
    """Structural diagnostics for one fault or attack tree."""
    out = []
    name = tree.name
    ids = Counter(n.id for n in tree.nodes)
    for nid, n in sorted(ids.items()):
        if n > 1:
            out.append(Diagnostic(f"{name}/{nid}", "unique-node", Severity.ERROR, "duplicate node id"))
    nodes = {n.id: n for n in tree.nodes}
    if tree.root not in nodes:
        out.append(Diagnostic(name, "root-exists", Severity.ERROR, f"root {tree.root!r} is not a node"))
        return out
    out_count = Counter(g.output for g in tree.gates)
    in_count = Counter(i for g in tree.gates for i in g.inputs)
    for g in tree.gates:
        if g.output not in nodes:
            out.append(Diagnostic(f"{name}/{g.output}", "gate-output", Severity.ERROR,
                                  "gate output is not a node"))
        if not g.inputs:
            out.append(Diagnostic(f"{name}/{g.output}", "gate-inputs", Severity.ERROR, "gate has no inputs"))
        for i in g.inputs:
            if i not in nodes:
                out.append(Diagnostic(f"{name}/{i}", "gate-input", Severity.ERROR,
                                      "gate input is not a node"))
    for nid, n in sorted(out_count.items()):
        if n > 1:
            out.append(Diagnostic(f"{name}/{nid}", "single-gate", Severity.ERROR,
                                  "node is the output of several gates"))
    for nid in sorted(nodes):
        uses = in_count.get(nid, 0)
        if nid == tree.root:
            if uses:
                out.append(Diagnostic(f"{name}/{nid}", "tree-root", Severity.ERROR,
                                      "root is used as a gate input"))
        elif uses != 1:
            out.append(Diagnostic(f"{name}/{nid}", "tree-shape", Severity.ERROR,
                                  f"node is an input of {uses} gates (expected exactly 1)"))
    cycle = find_cycle(nodes, [(g.output, i) for g in tree.gates for i in g.inputs])
    if cycle:
        out.append(Diagnostic(f"{name}/{cycle[0]}", "tree-acyclic", Severity.ERROR,
                              "gate cycle: " + " -> ".join(cycle)))

    outputs = set(out_count)
    root = nodes[tree.root]
    for n in tree.nodes:
        where = f"{name}/{n.id}"
        if n.kind not in TREE_NODE_KINDS:
            out.append(Diagnostic(where, "node-kind", Severity.ERROR, f"{n.kind.value} not allowed in a tree"))
            continue
        leaf = n.id not in outputs
        if n.kind in (NodeKind.BASIC_EVENT, NodeKind.BASIC_ATTACK_STEP) and not leaf:
            out.append(Diagnostic(where, "basic-leaf", Severity.ERROR, "basic event has a gate"))
        if n.kind is NodeKind.INTERMEDIATE_EVENT and leaf:
            out.append(Diagnostic(where, "intermediate-gate", Severity.ERROR, "intermediate event has no gate"))
        if n.kind is NodeKind.BASIC_ATTACK_STEP and (n.cve_id is None or n.vector is None):
            out.append(Diagnostic(where, "attack-step", Severity.ERROR, "attack step needs cve_id and vector"))
        if n.kind is NodeKind.EXTERNAL_EVENT and (n.target is None or n.direction is None
                                                  or n.requirement is None):
            out.append(Diagnostic(where, "external-event", Severity.ERROR,
                                  "external event needs target, direction and requirement"))
        if n.kind is NodeKind.TOP_EVENT and n.id != tree.root:
            out.append(Diagnostic(where, "top-event", Severity.ERROR, "top event must be the root"))
        if n.kind is NodeKind.TOP_EVENT and n.target is not None and n.direction is not Direction.CAUSES:
            out.append(Diagnostic(where, "top-event", Severity.ERROR, "targeted top event must cause, not require"))
        if is_attack and n.kind in (NodeKind.BASIC_EVENT, NodeKind.TOP_EVENT):
            out.append(Diagnostic(where, "attack-node-kind", Severity.ERROR,
                                  f"{n.kind.value} not allowed in an attack tree"))
        if not is_attack and n.kind is NodeKind.BASIC_ATTACK_STEP:
            out.append(Diagnostic(where, "fault-node-kind", Severity.ERROR,
                                  "attack step not allowed in a fault tree"))
        if (not is_attack and n.kind is NodeKind.EXTERNAL_EVENT and leaf
                and n.direction is not Direction.REQUIRES):
            out.append(Diagnostic(where, "external-direction", Severity.ERROR,
                                  "fault-tree external leaves must require"))
    if is_attack:
        if root.kind is not NodeKind.EXTERNAL_EVENT or root.direction is not Direction.CAUSES:
            out.append(Diagnostic(f"{name}/{root.id}", "attack-root", Severity.ERROR,
                                  "attack tree root must be a Causes external event"))
    elif root.kind is not NodeKind.TOP_EVENT:
        out.append(Diagnostic(f"{name}/{root.id}", "fault-root", Severity.ERROR,
                              "fault tree root must be a top event"))
    return out


def _check_trees(bundle, out):
    names = Counter(t.name for t in bundle.fault_trees + bundle.attack_trees)
    for name, n in sorted(names.items()):
        if n > 1:
            out.append(Diagnostic(name, "unique-tree", Severity.ERROR, "tree name used more than once"))
    targets = element_names(bundle)
    for tree in bundle.fault_trees + bundle.attack_trees:
        out.extend(check_tree(tree, isinstance(tree, AttackTree)))
        for n in tree.nodes:
            if n.target is not None and n.target not in targets:
                out.append(Diagnostic(f"{tree.name}/{n.id}", "target-resolves", Severity.WARNING,
                                      f"target {n.target!r} does not exist; event is permanently false"))


def _check_rules(bundle, out):
    for rule in bundle.combination_rules:
        names = {n.name for n in rule.pattern.nodes}
        for p in rule.ports:
            if p.var not in names:
                out.append(Diagnostic(rule.name, "port-variable", Severity.ERROR,
                                      f"port {p.id!r} binds unknown variable {p.var!r}"))


def validate_bundle(bundle: ModelBundle) -> List[Diagnostic]:
    out: List[Diagnostic] = []
    _check_dataflow(bundle, out)
    _check_deployment(bundle, out)
    _check_trees(bundle, out)
    _check_rules(bundle, out)
    order = {Severity.ERROR: 0, Severity.WARNING: 1}
    return sorted(set(out), key=lambda d: (order[d.severity], d.element, d.rule, d.message))
