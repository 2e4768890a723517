"""Concrete syntax for model bundles.

A bundle is a set of named UTF-8 documents:

``*.deploy``
    deployment entries in arrow notation, one per line::

        commands:Channel -> {Mavlink2.0, WiFi}
        Mavlink2.0:Protocol [cpe="cpe:2.3:a:mavlink:mavlink:2.0"] -> {MavlinkLib, UDP, UART}
        UART:Hardware [unauthenticated="true"]

``*.rules``
    transformation rules::

        rule toRadio
        graph {
          node commands:Channel
          node WiFi:Platform
          node Radio:Platform
          edges [(delete commands->WiFi:depends), (create commands->Radio:depends)]
        }

``*.json``
    dataflow graph, fault trees, attack trees, combination rules and
    invariants; each carries a top-level ``"section"`` key.
"""
from __future__ import annotations

import json
import os
import re
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from . import cvss
from .model import (
    DATAFLOW_KINDS, EDGE_LABELS, Action, AttackTree, Channel, CombinationRule,
    Component, DataflowGraph, DeploymentElement, DeploymentModel, Direction,
    ElementKind, FaultTree, FragmentTemplate, Gate, GateKind, GraphPattern,
    ImpactLevel, ImpactRequirement, Invariant, ModelBundle, NodeKind,
    PatternEdge, PatternNode, Port, RequirementMode, Resolution,
    TransformationRule, TreeNode, is_variable,
)


class ParseError(ValueError):
    def __init__(self, message: str, source: str = "<text>", line: Optional[int] = None,
                 column: Optional[int] = None):
        self.source, self.line, self.column = source, line, column
        where = source if line is None else f"{source}:{line}:{column}"
        super().__init__(f"{where}: {message}")
        self.message = message


class RuleError(ParseError):
    """A rule that parses but is not well-formed."""


# ---------------------------------------------------------------------------
# character scanner shared by the two line-oriented formats

class _Scanner:
    def __init__(self, text: str, source: str):
        self.text, self.source = text, source
        self.pos = 0

    def position(self, pos=None) -> Tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, message: str, pos=None) -> ParseError:
        line, col = self.position(pos)
        return ParseError(message, self.source, line, col)

    def peek(self, n=1) -> str:
        return self.text[self.pos:self.pos + n]

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def skip(self, newlines=True):
        while not self.at_end():
            c = self.text[self.pos]
            if c == "#":
                nl = self.text.find("\n", self.pos)
                self.pos = len(self.text) if nl < 0 else nl
            elif c == "\n" and not newlines:
                return
            elif c.isspace():
                self.pos += 1
            else:
                return

    def expect(self, token: str, newlines=True):
        self.skip(newlines)
        if not self.text.startswith(token, self.pos):
            found = self.peek() or "end of input"
            raise self.error(f"expected {token!r}, found {found!r}")
        self.pos += len(token)

    def accept(self, token: str, newlines=True) -> bool:
        self.skip(newlines)
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def quoted(self) -> str:
        start = self.pos
        self.pos += 1
        out = []
        while True:
            if self.at_end() or self.text[self.pos] == "\n":
                raise self.error("unterminated string", start)
            c = self.text[self.pos]
            if c == '"':
                self.pos += 1
                return "".join(out)
            if c == "\\":
                self.pos += 1
                if self.at_end():
                    raise self.error("unterminated string", start)
                c = self.text[self.pos]
            out.append(c)
            self.pos += 1

    def raw(self, stop: str, allow_spaces: bool) -> str:
        start = self.pos
        while not self.at_end():
            c = self.text[self.pos]
            if c in stop or c == "\n" or (c.isspace() and not allow_spaces):
                break
            if c == "-" and self.text.startswith("->", self.pos):
                break
            self.pos += 1
        return self.text[start:self.pos].strip()

    def name(self, stop: str, allow_spaces: bool, newlines=True) -> Tuple[str, int]:
        self.skip(newlines)
        pos = self.pos
        if self.peek() == '"':
            value = self.quoted()
        else:
            value = self.raw(stop, allow_spaces)
        if not value:
            found = self.peek() or "end of input"
            raise self.error(f"expected a name, found {found!r}", pos)
        return value, pos


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _parse_kind(scanner: _Scanner, newlines=True) -> ElementKind:
    scanner.skip(newlines)
    pos = scanner.pos
    word = scanner.raw(_DEPLOY_STOP + "()", allow_spaces=False)
    try:
        return ElementKind(word)
    except ValueError:
        raise scanner.error(f"unknown element kind {word!r}", pos) from None


# ---------------------------------------------------------------------------
# deployment arrow notation

_DEPLOY_STOP = ':,{}[]="#'
_DEPLOY_UNSAFE = re.compile(r'[:,{}\[\]="#\n\\]|->|^\s|\s$|^$')


def _deploy_name(name: str) -> str:
    return _quote(name) if _DEPLOY_UNSAFE.search(name) else name


def parse_deployment(text: str, source: str = "<deploy>") -> DeploymentModel:
    sc = _Scanner(text, source)
    declared: Dict[str, DeploymentElement] = {}
    implicit: Dict[str, Tuple[ElementKind, int]] = {}
    edges = set()
    while True:
        sc.skip()
        if sc.at_end():
            break
        name, pos = sc.name(_DEPLOY_STOP, allow_spaces=True, newlines=False)
        if name in declared:
            raise sc.error(f"duplicate definition of {name!r}", pos)
        sc.expect(":", newlines=False)
        kind = _parse_kind(sc, newlines=False)
        attrs: Dict[str, str] = {}
        if sc.accept("[", newlines=False):
            if not sc.accept("]"):
                while True:
                    key, kpos = sc.name(_DEPLOY_STOP, allow_spaces=False)
                    if key in attrs:
                        raise sc.error(f"duplicate attribute {key!r}", kpos)
                    sc.expect("=")
                    sc.skip()
                    if sc.peek() != '"':
                        raise sc.error("attribute values must be quoted strings")
                    attrs[key] = sc.quoted()
                    if sc.accept("]"):
                        break
                    sc.expect(",")
        if sc.accept("->", newlines=False):
            sc.expect("{", newlines=False)
            if not sc.accept("}"):
                while True:
                    dep, dpos = sc.name(_DEPLOY_STOP, allow_spaces=True)
                    if sc.accept(":"):
                        dkind = _parse_kind(sc)
                        prev = implicit.get(dep)
                        if prev and prev[0] is not dkind:
                            raise sc.error(f"conflicting kinds for {dep!r}", dpos)
                        implicit.setdefault(dep, (dkind, dpos))
                    edges.add((name, dep))
                    if sc.accept("}"):
                        break
                    sc.expect(",")
        sc.skip(newlines=False)
        if not sc.at_end() and sc.peek() != "\n":
            raise sc.error(f"unexpected {sc.peek()!r} after entry")
        cpe = attrs.pop("cpe", None)
        declared[name] = DeploymentElement(name, kind, cpe, attrs)
    for dep, (kind, pos) in implicit.items():
        if dep in declared:
            if declared[dep].kind is not kind:
                raise sc.error(f"duplicate definition of {dep!r} with kind {kind.value}", pos)
        else:
            declared[dep] = DeploymentElement(dep, kind)
    return DeploymentModel(tuple(declared.values()), frozenset(edges))


def serialize_deployment(dep: DeploymentModel) -> str:
    lines = ["# section: deployment"]
    for el in dep.elements:
        head = f"{_deploy_name(el.name)}:{el.kind.value}"
        attrs = ([("cpe", el.cpe)] if el.cpe is not None else []) + list(el.attributes)
        if attrs:
            head += " [" + ", ".join(f"{k}={_quote(v)}" for k, v in attrs) + "]"
        deps = dep.successors(el.name)
        if deps:
            head += " -> {" + ", ".join(_deploy_name(d) for d in deps) + "}"
        lines.append(head)
    # edges whose source is undeclared cannot be expressed; validation flags them
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# rule grammar

_RULE_STOP = ':,{}[]()"#'
_ACTIONS = {a.value: a for a in Action}
_KEYWORDS = {"rule", "graph", "node", "edges"} | set(_ACTIONS)
_RULE_SAFE = re.compile(r'^[^\s:,{}\[\]()"#\\]+$')


def _rule_name(name: str) -> str:
    if _RULE_SAFE.match(name) and "->" not in name and name not in _KEYWORDS:
        return name
    return _quote(name)


def _maybe_action(sc: _Scanner) -> Action:
    sc.skip()
    save = sc.pos
    if sc.peek() != '"':
        word = sc.raw(_RULE_STOP, allow_spaces=False)
        if word in _ACTIONS:
            sc.skip()
            if sc.peek() != ":" and not sc.text.startswith("->", sc.pos) and not sc.at_end():
                return _ACTIONS[word]
    sc.pos = save
    return Action.PRESERVE


def _parse_graph(sc: _Scanner, rule_name: str) -> GraphPattern:
    sc.expect("graph")
    sc.expect("{")
    nodes: List[PatternNode] = []
    positions = {}
    edges: List[PatternEdge] = []
    edge_pos = []
    while not sc.accept("}"):
        sc.skip()
        pos = sc.pos
        word = sc.raw(_RULE_STOP, allow_spaces=False)
        if word == "node":
            action = _maybe_action(sc)
            name, npos = sc.name(_RULE_STOP, allow_spaces=False)
            if name in positions:
                raise sc.error(f"node {name!r} declared twice", npos)
            sc.expect(":")
            kind = _parse_kind(sc)
            positions[name] = npos
            nodes.append(PatternNode(name, kind, action))
        elif word == "edges":
            sc.expect("[")
            if not sc.accept("]"):
                while True:
                    sc.expect("(")
                    sc.skip()
                    epos = sc.pos
                    action = _maybe_action(sc)
                    a, _ = sc.name(_RULE_STOP, allow_spaces=False)
                    sc.expect("->")
                    b, _ = sc.name(_RULE_STOP, allow_spaces=False)
                    sc.expect(":")
                    label, lpos = sc.name(_RULE_STOP, allow_spaces=False)
                    if label not in EDGE_LABELS:
                        raise sc.error(f"unknown edge label {label!r}", lpos)
                    sc.expect(")")
                    edges.append(PatternEdge(a, b, label, action))
                    edge_pos.append(epos)
                    if sc.accept("]"):
                        break
                    sc.expect(",")
        elif not word:
            raise sc.error(f"unexpected {sc.peek() or 'end of input'!r} in graph block", pos)
        else:
            raise sc.error(f"expected 'node' or 'edges', found {word!r}", pos)
    pattern = GraphPattern(tuple(nodes), tuple(edges))
    for e, epos in zip(edges, edge_pos):
        for end in (e.source, e.target):
            if end not in positions:
                raise RuleError(f"rule {rule_name!r}: edge {e.source}->{e.target} references "
                                f"undeclared node {end!r}", sc.source, *sc.position(epos))
    problems = pattern_problems(pattern, rule=True)
    if problems:
        raise RuleError(f"rule {rule_name!r}: {problems[0]}", sc.source, *sc.position())
    return pattern


def pattern_problems(pattern: GraphPattern, rule: bool = False,
                     allowed=frozenset(Action)) -> List[str]:
    """Well-formedness problems of a pattern, empty if none."""
    out = []
    nodes = {}
    for n in pattern.nodes:
        if n.name in nodes:
            out.append(f"node {n.name!r} declared twice")
        nodes[n.name] = n
        if n.action not in allowed:
            out.append(f"action {n.action.value} not allowed here")
        if n.action is Action.CREATE and is_variable(n.name):
            out.append(f"created node {n.name!r} needs a literal name")
        if not rule and n.action in (Action.CREATE, Action.DELETE):
            out.append(f"action {n.action.value} only allowed in transformation rules")
    seen = {}
    for e in pattern.edges:
        if e.label not in EDGE_LABELS:
            out.append(f"unknown edge label {e.label!r}")
        if e.action not in allowed:
            out.append(f"action {e.action.value} not allowed here")
        if not rule and e.action in (Action.CREATE, Action.DELETE):
            out.append(f"action {e.action.value} only allowed in transformation rules")
        prev = seen.get(e.key)
        if prev is not None:
            if {prev, e.action} == {Action.CREATE, Action.DELETE}:
                out.append(f"edge {e.source}->{e.target}:{e.label} is both deleted and created")
            else:
                out.append(f"edge {e.source}->{e.target}:{e.label} declared twice")
        seen[e.key] = e.action
        ends = [nodes.get(e.source), nodes.get(e.target)]
        if None in ends:
            missing = e.source if ends[0] is None else e.target
            out.append(f"edge {e.source}->{e.target} references undeclared node {missing!r}")
            continue
        acts = {n.action for n in ends}
        if e.action is Action.CREATE and Action.DELETE in acts:
            out.append(f"created edge {e.source}->{e.target} touches a deleted node")
        if e.action is not Action.CREATE and Action.CREATE in acts:
            out.append(f"edge {e.source}->{e.target} on a created node must be created")
        if e.action is not Action.FORBID and Action.FORBID in acts:
            out.append(f"edge {e.source}->{e.target} on a forbidden node must be forbidden")
        if e.action is Action.DELETE and Action.CREATE in acts:
            out.append(f"deleted edge {e.source}->{e.target} touches a created node")
    return out


def parse_transformation_rules(text: str, source: str = "<rules>") -> List[TransformationRule]:
    sc = _Scanner(text, source)
    rules = []
    names = set()
    while True:
        sc.skip()
        if sc.at_end():
            return rules
        name = "rule"
        pos = sc.pos
        if sc.peek() != '"':
            word = sc.raw(_RULE_STOP, allow_spaces=False)
            if word == "rule":
                name, pos = sc.name(_RULE_STOP, allow_spaces=False)
            elif word != "graph":
                raise sc.error(f"expected 'rule' or 'graph', found {word or sc.peek()!r}", pos)
            else:
                sc.pos = pos
        if name in names:
            raise sc.error(f"duplicate definition of rule {name!r}", pos)
        names.add(name)
        rules.append(TransformationRule(name, _parse_graph(sc, name)))


def parse_transformation_rule(text: str, name: Optional[str] = None,
                              source: str = "<rule>") -> TransformationRule:
    rules = parse_transformation_rules(text, source)
    if len(rules) != 1:
        raise ParseError(f"expected exactly one rule, found {len(rules)}", source)
    rule = rules[0]
    return TransformationRule(name, rule.pattern) if name else rule


def _graph_text(p: GraphPattern, indent="  ") -> List[str]:
    def act(a):
        return "" if a is Action.PRESERVE else a.value + " "
    lines = [f"{indent}node {act(n.action)}{_rule_name(n.name)}:{n.kind.value}" for n in p.nodes]
    if p.edges:
        edges = ", ".join(f"({act(e.action)}{_rule_name(e.source)}->{_rule_name(e.target)}:{e.label})"
                          for e in p.edges)
        lines.append(f"{indent}edges [{edges}]")
    return lines


def serialize_transformation_rules(rules) -> str:
    out = ["# section: rules"]
    for r in rules:
        out.append(f"rule {_rule_name(r.name)}")
        out.append("graph {")
        out.extend(_graph_text(r.pattern))
        out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# JSON documents

def _level(text: str) -> ImpactLevel:
    return ImpactLevel.from_title(text)


def requirement_from_json(d) -> ImpactRequirement:
    if d is None:
        return ImpactRequirement()
    unknown = set(d) - {"confidentiality", "integrity", "availability", "mode"}
    if unknown:
        raise ValueError(f"unknown requirement keys {sorted(unknown)}")
    return ImpactRequirement(
        _level(d.get("confidentiality", "None")),
        _level(d.get("integrity", "None")),
        _level(d.get("availability", "None")),
        RequirementMode(d.get("mode", "All")))


def requirement_to_json(r: ImpactRequirement) -> dict:
    return {"confidentiality": r.confidentiality.title, "integrity": r.integrity.title,
            "availability": r.availability.title, "mode": r.mode.value}


def node_from_json(d) -> TreeNode:
    return TreeNode(
        id=d["id"], label=d.get("label", d["id"]), kind=NodeKind(d["kind"]),
        cve_id=d.get("cve"),
        vector=cvss.parse(d["vector"]) if d.get("vector") else None,
        target=d.get("target"),
        requirement=requirement_from_json(d["requirement"]) if "requirement" in d else None,
        direction=Direction(d["direction"]) if d.get("direction") else None)


def node_to_json(n: TreeNode) -> dict:
    d = {"id": n.id, "label": n.label, "kind": n.kind.value}
    if n.cve_id is not None:
        d["cve"] = n.cve_id
    if n.vector is not None:
        d["vector"] = cvss.serialize(n.vector)
    if n.target is not None:
        d["target"] = n.target
    if n.direction is not None:
        d["direction"] = n.direction.value
    if n.requirement is not None:
        d["requirement"] = requirement_to_json(n.requirement)
    return d


def gate_from_json(d) -> Gate:
    return Gate(GateKind(d["kind"].upper()), d["output"], tuple(d["inputs"]))


def gate_to_json(g: Gate) -> dict:
    return {"kind": g.kind.value, "output": g.output, "inputs": list(g.inputs)}


def tree_from_json(d, cls):
    return cls(d["name"], d["root"], tuple(node_from_json(n) for n in d.get("nodes", ())),
               tuple(gate_from_json(g) for g in d.get("gates", ())))


def tree_to_json(t) -> dict:
    return {"name": t.name, "root": t.root,
            "nodes": [node_to_json(n) for n in t.nodes],
            "gates": [gate_to_json(g) for g in t.gates]}


def pattern_from_json(d) -> GraphPattern:
    nodes = tuple(PatternNode(n["name"], ElementKind(n["kind"]), Action(n.get("action", "preserve")))
                  for n in d.get("nodes", ()))
    edges = tuple(PatternEdge(e["from"], e["to"], e.get("label", "depends"),
                              Action(e.get("action", "preserve")))
                  for e in d.get("edges", ()))
    return GraphPattern(nodes, edges)


def pattern_to_json(p: GraphPattern) -> dict:
    return {"nodes": [{"name": n.name, "kind": n.kind.value, "action": n.action.value} for n in p.nodes],
            "edges": [{"from": e.source, "to": e.target, "label": e.label, "action": e.action.value}
                      for e in p.edges]}


def combination_rule_problems(rule: CombinationRule) -> List[str]:
    out = pattern_problems(rule.pattern, allowed={Action.PRESERVE, Action.FORBID})
    frag = rule.fragment
    nodes = {n.id: n for n in frag.nodes}
    ports = {p.id: p for p in rule.ports}
    pattern_vars = {n.name for n in rule.pattern.nodes_with(Action.PRESERVE)}
    outputs = {g.output for g in frag.gates}
    for p in rule.ports:
        if p.var not in pattern_vars:
            out.append(f"port {p.id!r} binds {p.var!r}, which is not a preserved pattern node")
        if p.id not in nodes or nodes[p.id].kind is not NodeKind.PORT:
            out.append(f"port {p.id!r} has no Port node in the fragment")
        if p.direction is Direction.REQUIRES and p.resolution is None:
            out.append(f"requires-port {p.id!r} needs a resolution")
    for n in frag.nodes:
        if n.kind is NodeKind.PORT and n.id not in ports:
            out.append(f"Port node {n.id!r} has no port definition")
        if n.kind not in (NodeKind.PORT, NodeKind.TRUE, NodeKind.INTERMEDIATE_EVENT):
            out.append(f"fragment node {n.id!r} has kind {n.kind.value}")
        leaf = n.id not in outputs
        if n.kind is NodeKind.INTERMEDIATE_EVENT and leaf:
            out.append(f"intermediate {n.id!r} has no gate")
        if n.kind is NodeKind.TRUE and not leaf:
            out.append(f"constant {n.id!r} cannot have a gate")
        if n.kind is NodeKind.PORT and n.id in ports:
            causes = ports[n.id].direction is Direction.CAUSES
            if causes != (n.id == frag.root):
                out.append(f"port {n.id!r}: exactly the fragment root is a Causes port")
            if not causes and not leaf:
                out.append(f"requires-port {n.id!r} must be a leaf")
    if frag.root not in nodes:
        out.append(f"fragment root {frag.root!r} is not a node")
    used = [i for g in frag.gates for i in g.inputs]
    for i in set(used):
        if i not in nodes:
            out.append(f"gate input {i!r} is not a node")
        elif used.count(i) != 1:
            out.append(f"fragment node {i!r} used by several gates")
    if frag.root in used:
        out.append("fragment root used as gate input")
    for nid in nodes:
        if nid != frag.root and nid not in used:
            out.append(f"fragment node {nid!r} is disconnected")
    return out


def combination_rule_from_json(d) -> CombinationRule:
    frag = d["fragment"]
    fragment = FragmentTemplate(frag["root"], tuple(node_from_json(n) for n in frag.get("nodes", ())),
                                tuple(gate_from_json(g) for g in frag.get("gates", ())))
    ports = tuple(Port(p["id"], p["var"], Direction(p["direction"]),
                       requirement_from_json(p.get("requirement")),
                       Resolution.parse(p["resolution"]) if p.get("resolution") else None)
                  for p in d.get("ports", ()))
    return CombinationRule(d["name"], d.get("source", ""), pattern_from_json(d["pattern"]),
                           fragment, ports)


def combination_rule_to_json(r: CombinationRule) -> dict:
    ports = []
    for p in r.ports:
        pd = {"id": p.id, "var": p.var, "direction": p.direction.value,
              "requirement": requirement_to_json(p.requirement)}
        if p.resolution is not None:
            pd["resolution"] = str(p.resolution)
        ports.append(pd)
    return {"name": r.name, "source": r.source, "pattern": pattern_to_json(r.pattern),
            "fragment": {"root": r.fragment.root,
                         "nodes": [node_to_json(n) for n in r.fragment.nodes],
                         "gates": [gate_to_json(g) for g in r.fragment.gates]},
            "ports": ports}


def dataflow_from_json(d) -> DataflowGraph:
    comps = [Component(c if isinstance(c, str) else c["name"]) for c in d.get("components", ())]
    chans = [Channel(c["name"], frozenset(c.get("senders", ())), frozenset(c.get("receivers", ())))
             for c in d.get("channels", ())]
    return DataflowGraph(tuple(comps), tuple(chans))


def dataflow_to_json(df: DataflowGraph) -> dict:
    return {"components": [c.name for c in df.components],
            "channels": [{"name": c.name, "senders": sorted(c.senders), "receivers": sorted(c.receivers)}
                         for c in df.channels]}


def _dump(section: str, body: dict) -> str:
    return json.dumps({"section": section, **body}, indent=2, ensure_ascii=False) + "\n"


def _loads(text: str, source: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, source, exc.lineno, exc.colno) from None


# ---------------------------------------------------------------------------
# bundles

DOCUMENT_NAMES = {
    "dataflow": "dataflow.json",
    "deployment": "deployment.deploy",
    "fault-trees": "fault_trees.json",
    "attack-trees": "attack_trees.json",
    "rules": "adaptation.rules",
    "combination-rules": "combination_rules.json",
    "invariants": "invariants.json",
}
_JSON_SECTIONS = {"dataflow", "fault-trees", "attack-trees", "combination-rules", "invariants"}


def section_of(name: str, text: str) -> str:
    if name.endswith(".deploy"):
        return "deployment"
    if name.endswith(".rules"):
        return "rules"
    if name.endswith(".json"):
        doc = _loads(text, name)
        kind = doc.get("section") if isinstance(doc, dict) else None
        if kind in _JSON_SECTIONS:
            return kind
        raise ParseError(f"unknown section kind {kind!r}", name)
    raise ParseError("unknown section kind (expected .deploy, .rules or .json)", name)


def _unique(items, what, source):
    seen = set()
    for it in items:
        if it.name in seen:
            raise ParseError(f"duplicate definition of {what} {it.name!r}", source)
        seen.add(it.name)
    return tuple(items)


def parse_bundle(sources: Mapping[str, str]) -> ModelBundle:
    """Parse named documents (file name -> text) into a bundle."""
    components, channels, elements, depends = [], [], [], set()
    faults, attacks, trules, crules, invariants = [], [], [], [], []
    for name in sorted(sources):
        text = sources[name]
        kind = section_of(name, text)
        try:
            if kind == "deployment":
                dep = parse_deployment(text, name)
                elements.extend(dep.elements)
                depends |= dep.depends
            elif kind == "rules":
                trules.extend(parse_transformation_rules(text, name))
            else:
                doc = _loads(text, name)
                if kind == "dataflow":
                    df = dataflow_from_json(doc)
                    components.extend(df.components)
                    channels.extend(df.channels)
                elif kind == "fault-trees":
                    faults.extend(tree_from_json(t, FaultTree) for t in doc.get("trees", ()))
                elif kind == "attack-trees":
                    attacks.extend(tree_from_json(t, AttackTree) for t in doc.get("trees", ()))
                elif kind == "combination-rules":
                    for r in doc.get("rules", ()):
                        rule = combination_rule_from_json(r)
                        problems = combination_rule_problems(rule)
                        if problems:
                            raise RuleError(f"combination rule {rule.name!r}: {problems[0]}", name)
                        crules.append(rule)
                elif kind == "invariants":
                    for inv in doc.get("invariants", ()):
                        pattern = pattern_from_json(inv["pattern"])
                        problems = pattern_problems(pattern, allowed={Action.PRESERVE, Action.FORBID})
                        if problems:
                            raise RuleError(f"invariant {inv['name']!r}: {problems[0]}", name)
                        invariants.append(Invariant(inv["name"], pattern))
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"invalid {kind} document: {exc!r}", name) from None
    dataflow_names = [c for c in components] + [c for c in channels]
    _unique(dataflow_names, "dataflow element", "dataflow")
    _unique(elements, "deployment element", "deployment")
    _unique(faults + attacks, "tree", "trees")
    _unique(trules, "transformation rule", "rules")
    _unique(crules, "combination rule", "combination-rules")
    _unique(invariants, "invariant", "invariants")
    return ModelBundle(
        DataflowGraph(tuple(components), tuple(channels)),
        DeploymentModel(tuple(elements), frozenset(depends)),
        tuple(faults), tuple(attacks), tuple(trules), tuple(crules), tuple(invariants))


def serialize_bundle(bundle: ModelBundle) -> Dict[str, str]:
    n = DOCUMENT_NAMES
    return {
        n["dataflow"]: _dump("dataflow", dataflow_to_json(bundle.dataflow)),
        n["deployment"]: serialize_deployment(bundle.deployment),
        n["fault-trees"]: _dump("fault-trees", {"trees": [tree_to_json(t) for t in bundle.fault_trees]}),
        n["attack-trees"]: _dump("attack-trees", {"trees": [tree_to_json(t) for t in bundle.attack_trees]}),
        n["rules"]: serialize_transformation_rules(bundle.transformation_rules),
        n["combination-rules"]: _dump("combination-rules", {
            "rules": [combination_rule_to_json(r) for r in bundle.combination_rules]}),
        n["invariants"]: _dump("invariants", {
            "invariants": [{"name": i.name, "pattern": pattern_to_json(i.pattern)} for i in bundle.invariants]}),
    }


def attack_trees_document(trees) -> str:
    return _dump("attack-trees", {"trees": [tree_to_json(t) for t in trees]})


def parse_attack_trees_document(text: str, source="<attack-trees>"):
    doc = _loads(text, source)
    return [tree_from_json(t, AttackTree) for t in doc.get("trees", ())]


def read_documents(directory) -> Dict[str, str]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"bundle directory {directory} does not exist")
    docs = {}
    for path in sorted(directory.iterdir()):
        if path.is_file() and path.suffix in (".deploy", ".rules", ".json"):
            docs[path.name] = path.read_text(encoding="utf-8")
    return docs


def load_bundle(directory) -> ModelBundle:
    return parse_bundle(read_documents(directory))


def write_bundle(bundle: ModelBundle, directory) -> List[Path]:
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, text in serialize_bundle(bundle).items():
        path = directory / name
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    return paths
