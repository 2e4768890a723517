"""Graph transformation over the dataflow + deployment view of a bundle.

The typed graph joins both models by name: components and channels become
``Component``/``Channel`` nodes, deployment elements keep their kind, and
edges are labelled ``sends`` (component -> channel), ``receives``
(channel -> component) or ``depends``.
"""
from __future__ import annotations

import hashlib
import logging
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .dsl import serialize_bundle
from .model import (
    DATAFLOW_KINDS, Action, Channel, Component, DataflowGraph, DeploymentElement,
    DeploymentModel, ElementKind, GraphPattern, Invariant, ModelBundle,
    TransformationRule, is_variable,
)
from .validate import errors, validate_bundle

log = logging.getLogger(__name__)

DEFAULT_STATE_CAP = 10_000

Binding = Tuple[Tuple[str, str], ...]
Edge = Tuple[str, str, str]


class ApplicationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TypedGraph:
    nodes: Dict[str, ElementKind]
    edges: FrozenSet[Edge]
    deployed: FrozenSet[str]  # Component/Channel names present in the deployment model

    @classmethod
    def of(cls, bundle: ModelBundle) -> "TypedGraph":
        nodes: Dict[str, ElementKind] = {}
        edges = set()
        for c in bundle.dataflow.components:
            nodes[c.name] = ElementKind.COMPONENT
        for ch in bundle.dataflow.channels:
            nodes[ch.name] = ElementKind.CHANNEL
            edges.update((s, ch.name, "sends") for s in ch.senders)
            edges.update((ch.name, r, "receives") for r in ch.receivers)
        deployed = set()
        for el in bundle.deployment.elements:
            nodes.setdefault(el.name, el.kind)
            if el.kind in DATAFLOW_KINDS:
                deployed.add(el.name)
        edges.update((a, b, "depends") for a, b in bundle.deployment.depends)
        return cls(nodes, frozenset(edges), frozenset(deployed))

    def out_edges(self):
        idx = {}
        for e in self.edges:
            idx.setdefault(e[0], set()).add(e)
            idx.setdefault(e[1], set()).add(e)
        return idx


def _order(pattern_nodes, graph: TypedGraph):
    literals = [n for n in pattern_nodes if not is_variable(n.name)]
    variables = [n for n in pattern_nodes if is_variable(n.name)]
    by_kind = {}
    for name, kind in graph.nodes.items():
        by_kind.setdefault(kind, []).append(name)
    variables.sort(key=lambda n: (len(by_kind.get(n.kind, ())), n.name))
    return literals + variables, by_kind


def _search(pattern_nodes, edges, graph, base: Dict[str, str], first_only=False):
    """Injective assignments extending ``base`` so that every edge exists."""
    order, by_kind = _order(pattern_nodes, graph)
    used = set(base.values())
    results = []
    binding = dict(base)

    def ok_edges(var):
        for a, b, label in edges:
            if var in (a, b) and a in binding and b in binding:
                if (binding[a], binding[b], label) not in graph.edges:
                    return False
        return True

    def rec(i):
        if i == len(order):
            results.append(dict(binding))
            return first_only
        pn = order[i]
        if is_variable(pn.name):
            cands = sorted(by_kind.get(pn.kind, ()))
        else:
            cands = [pn.name] if graph.nodes.get(pn.name) is pn.kind else []
        for c in cands:
            if c in used:
                continue
            binding[pn.name] = c
            used.add(c)
            if ok_edges(pn.name) and rec(i + 1):
                return True
            used.discard(c)
            del binding[pn.name]
        return False

    if all(a in binding and b in binding and (binding[a], binding[b], l) in graph.edges
           for a, b, l in edges if a in binding and b in binding):
        rec(0)
    return results


def _nac_groups(pattern: GraphPattern):
    """Split forbidden elements into connected negative application conditions."""
    forbid_nodes = {n.name: n for n in pattern.nodes_with(Action.FORBID)}
    forbid_edges = [e for e in pattern.edges_with(Action.FORBID)]
    parent = {n: n for n in forbid_nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    loose = []
    for e in forbid_edges:
        ends = [x for x in (e.source, e.target) if x in forbid_nodes]
        if not ends:
            loose.append(([], [e]))
        elif len(ends) == 2:
            parent[find(ends[0])] = find(ends[1])
    groups = {}
    for name in forbid_nodes:
        groups.setdefault(find(name), ([], []))[0].append(forbid_nodes[name])
    for e in forbid_edges:
        ends = [x for x in (e.source, e.target) if x in forbid_nodes]
        if ends:
            groups[find(ends[0])][1].append(e)
    return list(groups.values()) + loose


def match_pattern(pattern: GraphPattern, graph: TypedGraph) -> List[Dict[str, str]]:
    """All injective matches of the pattern's Preserve/Delete part that no
    Forbid group can extend.  Sorted by the bound names in variable order."""
    lhs_nodes = pattern.nodes_with(Action.PRESERVE, Action.DELETE)
    lhs_edges = [e.key for e in pattern.edges_with(Action.PRESERVE, Action.DELETE)]
    found = _search(lhs_nodes, lhs_edges, graph, {})
    nacs = _nac_groups(pattern)
    if nacs:
        kept = []
        for b in found:
            blocked = any(_search(nodes, [e.key for e in es], graph, b, first_only=True)
                          for nodes, es in nacs)
            if not blocked:
                kept.append(b)
        found = kept
    keys = sorted(n.name for n in lhs_nodes)
    found.sort(key=lambda b: tuple(b[k] for k in keys))
    return found


def as_binding(d: Dict[str, str]) -> Binding:
    return tuple(sorted(d.items()))


@dataclass(frozen=True)
class ModelState:
    bundle: ModelBundle
    hash: str

    @classmethod
    def of(cls, bundle: ModelBundle) -> "ModelState":
        return cls(bundle, canonical_hash(bundle))

    @property
    def short(self) -> str:
        return self.hash[:10]


def canonical_text(bundle: ModelBundle) -> str:
    docs = serialize_bundle(bundle)
    return "".join(f"=== {name}\n{docs[name]}" for name in sorted(docs))


def canonical_hash(bundle: ModelBundle) -> str:
    return hashlib.sha256(canonical_text(bundle).encode("utf-8")).hexdigest()


def find_matches(rule: TransformationRule, state: ModelState) -> List[Binding]:
    return [as_binding(b) for b in match_pattern(rule.pattern, TypedGraph.of(state.bundle))]


def _rebuild(bundle: ModelBundle, nodes: Dict[str, ElementKind], edges, deployed) -> ModelBundle:
    comps = [Component(n) for n, k in nodes.items() if k is ElementKind.COMPONENT]
    chans = []
    for n, k in nodes.items():
        if k is ElementKind.CHANNEL:
            chans.append(Channel(n, frozenset(a for a, b, l in edges if b == n and l == "sends"),
                                 frozenset(b for a, b, l in edges if a == n and l == "receives")))
    old = {el.name: el for el in bundle.deployment.elements}
    depends = frozenset((a, b) for a, b, l in edges if l == "depends")
    elements = []
    for n, k in nodes.items():
        if k in DATAFLOW_KINDS and n not in deployed:
            continue
        prev = old.get(n)
        if prev is not None and prev.kind is k:
            elements.append(prev)
        else:
            elements.append(DeploymentElement(n, k))
    return bundle.replace(dataflow=DataflowGraph(tuple(comps), tuple(chans)),
                          deployment=DeploymentModel(tuple(elements), depends))


def apply_rule(state: ModelState, rule: TransformationRule, binding) -> ModelState:
    """Apply ``rule`` at ``binding``; returns a new state, input untouched."""
    b = dict(binding)
    graph = TypedGraph.of(state.bundle)
    p = rule.pattern
    lhs = p.nodes_with(Action.PRESERVE, Action.DELETE)
    if set(b) != {n.name for n in lhs}:
        raise ApplicationError(f"{rule.name}: binding does not cover the rule's nodes")
    if as_binding(b) not in {as_binding(m) for m in match_pattern(p, graph)}:
        raise ApplicationError(f"{rule.name}: binding {as_binding(b)} is not a match")

    for n in p.nodes_with(Action.CREATE):
        if n.name in graph.nodes:
            raise ApplicationError(f"{rule.name}: created node {n.name!r} already exists")
        b[n.name] = n.name

    def image(e):
        return (b[e.source], b[e.target], e.label)

    deleted_edges = {image(e) for e in p.edges_with(Action.DELETE)}
    deleted_nodes = {b[n.name] for n in p.nodes_with(Action.DELETE)}
    for name in sorted(deleted_nodes):
        dangling = sorted(e for e in graph.edges
                          if name in (e[0], e[1]) and e not in deleted_edges)
        if dangling:
            a, c, l = dangling[0]
            raise ApplicationError(f"{rule.name}: deleting {name!r} would leave dangling edge "
                                   f"{a}->{c}:{l}")
    created_edges = {image(e) for e in p.edges_with(Action.CREATE)}
    for e in sorted(created_edges):
        if e in graph.edges:
            raise ApplicationError(f"{rule.name}: created edge {e[0]}->{e[1]}:{e[2]} already exists")

    nodes = {k: v for k, v in graph.nodes.items() if k not in deleted_nodes}
    deployed = set(graph.deployed) - deleted_nodes
    for n in p.nodes_with(Action.CREATE):
        nodes[n.name] = n.kind
        if n.kind in DATAFLOW_KINDS:
            deployed.add(n.name)
    edges = (set(graph.edges) - deleted_edges) | created_edges
    deployed |= {a for a, _, l in edges if l == "depends" and nodes.get(a) in DATAFLOW_KINDS}
    deployed |= {c for _, c, l in edges if l == "depends" and nodes.get(c) in DATAFLOW_KINDS}

    bundle = _rebuild(state.bundle, nodes, edges, deployed)
    problems = errors(validate_bundle(bundle))
    if problems:
        raise ApplicationError(f"{rule.name}: result is invalid: {problems[0]}")
    return ModelState.of(bundle)


@dataclass(frozen=True)
class Transition:
    source: str
    rule: str
    binding: Binding
    target: str


@dataclass(frozen=True)
class Violation:
    state: str
    invariant: str
    binding: Binding


@dataclass(frozen=True)
class RejectedApplication:
    state: str
    rule: str
    binding: Binding
    reason: str


@dataclass
class StateSpace:
    states: Dict[str, ModelState]
    transitions: List[Transition]
    initial: str
    violations: List[Violation]
    exhausted: bool = False
    rejected: List[RejectedApplication] = field(default_factory=list)
    depth: Dict[str, int] = field(default_factory=dict)

    def successors(self, h: str) -> List[Transition]:
        return [t for t in self.transitions if t.source == h]

    def path_to(self, h: str) -> List[Transition]:
        """Shortest rule path from the initial state (BFS over transitions)."""
        prev = {self.initial: None}
        queue = deque([self.initial])
        while queue:
            cur = queue.popleft()
            if cur == h:
                break
            for t in self.successors(cur):
                if t.target not in prev:
                    prev[t.target] = t
                    queue.append(t.target)
        if h not in prev:
            raise KeyError(h)
        path = []
        while prev[h] is not None:
            path.append(prev[h])
            h = prev[h].source
        return path[::-1]


def check_invariants(state: ModelState, invariants: Sequence[Invariant]) -> List[Violation]:
    graph = TypedGraph.of(state.bundle)
    out = []
    for inv in invariants:
        for b in match_pattern(inv.pattern, graph):
            out.append(Violation(state.hash, inv.name, as_binding(b)))
    return out


def explore(initial: ModelState, rules: Iterable[TransformationRule],
            invariants: Iterable[Invariant] = (), max_depth: int = 10,
            state_cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    """Breadth-first closure of rule applications, deduplicated by hash."""
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    rules = sorted(rules, key=lambda r: r.name)
    invariants = sorted(invariants, key=lambda i: i.name)
    space = StateSpace({initial.hash: initial}, [], initial.hash, [], depth={initial.hash: 0})
    space.violations.extend(check_invariants(initial, invariants))
    frontier = [initial]
    for depth in range(1, max_depth + 1):
        nxt = []
        for state in frontier:
            for rule in rules:
                for binding in find_matches(rule, state):
                    try:
                        result = apply_rule(state, rule, binding)
                    except ApplicationError as exc:
                        space.rejected.append(RejectedApplication(state.hash, rule.name, binding, str(exc)))
                        continue
                    known = space.states.get(result.hash)
                    if known is not None and known.bundle != result.bundle:
                        raise RuntimeError(f"hash collision on {result.hash}")
                    if known is None:
                        if len(space.states) >= state_cap:
                            space.exhausted = True
                            log.warning("state cap %d reached; exploration truncated", state_cap)
                            return space
                        space.states[result.hash] = result
                        space.depth[result.hash] = depth
                        space.violations.extend(check_invariants(result, invariants))
                        nxt.append(result)
                    space.transitions.append(Transition(state.hash, rule.name, binding, result.hash))
        if not nxt:
            break
        frontier = nxt
    return space


def state_cap_from_env(default=DEFAULT_STATE_CAP) -> int:
    value = os.environ.get("AFTCO_STATE_CAP")
    return int(value) if value else default


def diff_from(initial: ModelBundle, other: ModelBundle) -> List[str]:
    a, b = TypedGraph.of(initial), TypedGraph.of(other)
    out = [f"-{n}:{a.nodes[n].value}" for n in sorted(set(a.nodes) - set(b.nodes))]
    out += [f"+{n}:{b.nodes[n].value}" for n in sorted(set(b.nodes) - set(a.nodes))]
    out += [f"-{x}->{y}:{l}" for x, y, l in sorted(a.edges - b.edges)]
    out += [f"+{x}->{y}:{l}" for x, y, l in sorted(b.edges - a.edges)]
    return out


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def state_space_dot(space: StateSpace) -> str:
    init = space.states[space.initial].bundle
    bad = {v.state for v in space.violations}
    lines = ["digraph statespace {", "  rankdir=LR;", '  node [shape=box, fontname="Helvetica"];']
    for h in sorted(space.states, key=lambda x: (space.depth.get(x, 0), x)):
        diff = diff_from(init, space.states[h].bundle)
        label = h[:10] + ("\\n" + "\\n".join(_dot_escape(d) for d in diff) if diff else "\\n(initial)")
        attrs = [f'label="{label}"']
        if h == space.initial:
            attrs.append("peripheries=2")
        if h in bad:
            attrs.append("color=red")
        lines.append(f'  "{h[:10]}" [{", ".join(attrs)}];')
    for t in sorted(space.transitions, key=lambda t: (t.source, t.rule, t.binding, t.target)):
        lines.append(f'  "{t.source[:10]}" -> "{t.target[:10]}" [label="{_dot_escape(t.rule)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
