"""Qualitative AFT analysis: minimal cut sets and transient exposure."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence

from . import kernels
from .combine import Aft
from .cvss import base_score
from .model import GateKind, NodeKind
from .transform import StateSpace

DEFAULT_MAX_LEAVES = 64
BRUTE_FORCE_MAX_LEAVES = 20


class TooManyLeavesError(ValueError):
    pass


class CutSetClass(enum.Enum):
    ATTACK_ONLY = "AttackOnly"
    FAULT_ONLY = "FaultOnly"
    MIXED = "Mixed"


@dataclass(frozen=True)
class CutSet:
    leaves: FrozenSet[str]
    classification: CutSetClass
    max_exploit_score: Optional[float] = None

    def sort_key(self):
        return (len(self.leaves), sorted(self.leaves))


_ACTIONABLE = (NodeKind.BASIC_EVENT, NodeKind.BASIC_ATTACK_STEP)


def _reachable(aft: Aft) -> List[str]:
    seen, order, stack = set(), [], [aft.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            continue
        seen.add(nid)
        order.append(nid)
        g = aft.gate_for(nid)
        if g is not None:
            stack.extend(g.inputs)
    return order


def actionable_leaves(aft: Aft) -> List[str]:
    return sorted(n for n in _reachable(aft)
                  if aft.gate_for(n) is None and aft.node(n).kind in _ACTIONABLE)


def make_cut_set(aft: Aft, leaves) -> CutSet:
    leaves = frozenset(leaves)
    kinds = {aft.node(l).kind for l in leaves}
    if kinds == {NodeKind.BASIC_ATTACK_STEP}:
        cls = CutSetClass.ATTACK_ONLY
    elif kinds == {NodeKind.BASIC_EVENT}:
        cls = CutSetClass.FAULT_ONLY
    else:
        cls = CutSetClass.MIXED
    scores = [base_score(aft.node(l).node.vector) for l in leaves
              if aft.node(l).kind is NodeKind.BASIC_ATTACK_STEP and aft.node(l).node.vector is not None]
    return CutSet(leaves, cls, max(scores) if scores else None)


def _to_cut_sets(aft, masks, leaf_ids):
    out = []
    for m in masks:
        if m == 0:
            # top event holds unconditionally; there is no non-empty minimal set
            continue
        out.append(make_cut_set(aft, (leaf_ids[i] for i in range(len(leaf_ids)) if m >> i & 1)))
    return sorted(out, key=CutSet.sort_key)


def cut_set_families(aft: Aft, max_leaves: int = DEFAULT_MAX_LEAVES, kernel=None):
    """Bottom-up family per node; returns (top family, leaf id list).
    ``kernel`` forces a backend module (see ``kernels.available``)."""
    leaf_ids = actionable_leaves(aft)
    if len(leaf_ids) > max_leaves:
        raise TooManyLeavesError(
            f"{aft.name}: {len(leaf_ids)} leaves exceed the bound of {max_leaves}; "
            "decompose the tree or raise the bound")
    k = kernel if kernel is not None and len(leaf_ids) <= kernels.MAX_COMPILED_LEAVES \
        else kernels.for_width(len(leaf_ids))
    bit = {l: 1 << i for i, l in enumerate(leaf_ids)}
    memo: Dict[str, list] = {}
    stack = [(aft.root, False)]
    while stack:
        nid, expanded = stack.pop()
        if nid in memo:
            continue
        g = aft.gate_for(nid)
        if g is None:
            kind = aft.node(nid).kind
            if kind in _ACTIONABLE:
                memo[nid] = [bit[nid]]
            elif kind is NodeKind.TRUE:
                memo[nid] = [0]
            else:
                memo[nid] = []  # unresolved: never satisfiable
            continue
        if not expanded:
            stack.append((nid, True))
            stack.extend((i, False) for i in g.inputs if i not in memo)
            continue
        fams = [memo[i] for i in g.inputs]
        if g.kind is GateKind.OR:
            acc = k.minimize([m for f in fams for m in f])
        else:
            acc = [0]
            for f in fams:
                acc = k.product(acc, f)
                if not acc:
                    break
        memo[nid] = acc
    return memo[aft.root], leaf_ids


def minimal_cut_sets(aft: Aft, max_leaves: int = DEFAULT_MAX_LEAVES, kernel=None) -> List[CutSet]:
    family, leaf_ids = cut_set_families(aft, max_leaves, kernel)
    return _to_cut_sets(aft, family, leaf_ids)


def evaluate(aft: Aft, occurred: FrozenSet[str]) -> bool:
    """Truth value of the top event when exactly ``occurred`` leaves hold."""
    memo: Dict[str, bool] = {}

    def ev(nid):
        if nid in memo:
            return memo[nid]
        g = aft.gate_for(nid)
        if g is None:
            kind = aft.node(nid).kind
            val = kind is NodeKind.TRUE or (kind in _ACTIONABLE and nid in occurred)
        elif g.kind is GateKind.AND:
            val = all(ev(i) for i in g.inputs)
        else:
            val = any(ev(i) for i in g.inputs)
        memo[nid] = val
        return val

    return ev(aft.root)


def brute_force_cut_sets(aft: Aft, max_leaves: int = BRUTE_FORCE_MAX_LEAVES) -> List[CutSet]:
    """Truth-table oracle: enumerate every leaf valuation."""
    leaves = actionable_leaves(aft)
    n = len(leaves)
    if n > max_leaves:
        raise TooManyLeavesError(f"{aft.name}: {n} leaves; brute force supports at most {max_leaves}")
    satisfying = set()
    for mask in range(1 << n):
        occurred = frozenset(leaves[i] for i in range(n) if mask >> i & 1)
        if evaluate(aft, occurred):
            satisfying.add(mask)
    minimal = []
    for mask in satisfying:
        # monotone gates: minimal iff dropping any single leaf breaks it
        if mask and all((mask & ~(1 << i)) not in satisfying for i in range(n) if mask >> i & 1):
            minimal.append(mask)
    return _to_cut_sets(aft, minimal, leaves)


# ---------------------------------------------------------------------------
# reports

@dataclass
class Exposure:
    state: str
    tree: str
    cut_set: CutSet
    path: List[dict]


@dataclass
class Report:
    initial: str
    states: List[dict]
    exposures: List[Exposure]
    violations: List[dict]
    assumptions: List[dict]
    exhausted: bool = False
    rejected: List[dict] = field(default_factory=list)

    @property
    def attack_only_exposure(self) -> bool:
        return any(e.cut_set.classification is CutSetClass.ATTACK_ONLY for e in self.exposures)

    def to_json(self) -> dict:
        return {
            "initial": self.initial,
            "exhausted": self.exhausted,
            "states": self.states,
            "transient_exposure": [
                {"state": e.state, "tree": e.tree, "path": e.path, **cut_set_json(e.cut_set)}
                for e in self.exposures],
            "violations": self.violations,
            "assumptions": self.assumptions,
            "rejected_applications": self.rejected,
            "attack_only_exposure": self.attack_only_exposure,
        }


def cut_set_json(c: CutSet) -> dict:
    return {"leaves": sorted(c.leaves), "class": c.classification.value,
            "max_exploit_score": c.max_exploit_score}


def _path_json(space, h):
    return [{"rule": t.rule, "binding": dict(t.binding), "to": t.target[:10]} for t in space.path_to(h)]


def state_space_report(space: StateSpace, afts: Mapping[str, Sequence[Aft]],
                       initial: Optional[str] = None,
                       max_leaves: int = DEFAULT_MAX_LEAVES) -> Report:
    initial = initial or space.initial
    missing = set(space.states) - set(afts)
    if missing:
        raise ValueError(f"no AFTs for states {sorted(missing)}")
    order = sorted(space.states, key=lambda h: (space.depth.get(h, 0), h))
    cut_sets = {h: {a.name: minimal_cut_sets(a, max_leaves) for a in afts[h]} for h in order}
    baseline = {name: {c.leaves for c in cs} for name, cs in cut_sets[initial].items()}

    states, exposures, assumptions = [], [], []
    for h in order:
        entry = {"hash": h, "short": h[:10], "depth": space.depth.get(h, 0),
                 "path": _path_json(space, h), "trees": []}
        for aft in afts[h]:
            entry["trees"].append({
                "name": aft.name, "top": aft.node(aft.root).label,
                "cut_sets": [cut_set_json(c) for c in cut_sets[h][aft.name]],
                "unresolved": [u.node for u in aft.unresolved]})
            for u in aft.unresolved:
                assumptions.append({"state": h[:10], "tree": aft.name, "node": u.node,
                                    "target": u.target, "reason": u.reason})
            if h != initial:
                base = baseline.get(aft.name, set())
                for c in cut_sets[h][aft.name]:
                    if c.leaves not in base:
                        exposures.append(Exposure(h, aft.name, c, _path_json(space, h)))
        states.append(entry)
    violations = [{"state": v.state[:10], "invariant": v.invariant, "binding": dict(v.binding)}
                  for v in space.violations]
    rejected = [{"state": r.state[:10], "rule": r.rule, "binding": dict(r.binding), "reason": r.reason}
                for r in space.rejected]
    return Report(initial, states, exposures, violations, assumptions, space.exhausted, rejected)


def render_text(report: Report) -> str:
    out = [f"initial state {report.initial[:10]}"]
    if report.exhausted:
        out.append("WARNING: state cap reached, state space is partial")
    for s in report.states:
        path = " -> ".join(p["rule"] for p in s["path"]) or "(initial)"
        out.append("")
        out.append(f"state {s['short']} (depth {s['depth']}, path: {path})")
        for t in s["trees"]:
            out.append(f"  {t['name']}: {t['top']}")
            for c in t["cut_sets"]:
                score = "" if c["max_exploit_score"] is None else f" max CVSS {c['max_exploit_score']}"
                out.append(f"    [{c['class']}] {{{', '.join(c['leaves'])}}}{score}")
            if not t["cut_sets"]:
                out.append("    (no cut sets)")
    out.append("")
    out.append("transient exposure:")
    if not report.exposures:
        out.append("  none")
    for e in report.exposures:
        path = " -> ".join(p["rule"] for p in e.path)
        out.append(f"  state {e.state[:10]} via {path}: {e.tree} "
                   f"[{e.cut_set.classification.value}] {{{', '.join(sorted(e.cut_set.leaves))}}}")
    out.append("")
    out.append("invariant violations:")
    if not report.violations:
        out.append("  none")
    for v in report.violations:
        binding = ", ".join(f"{k}={val}" for k, val in sorted(v["binding"].items()))
        out.append(f"  state {v['state']}: {v['invariant']} ({binding})")
    if report.assumptions:
        out.append("")
        out.append("assumptions (unresolved, treated as never occurring):")
        for a in report.assumptions:
            out.append(f"  state {a['state']}: {a['node']} ({a['reason']})")
    return "\n".join(out) + "\n"
