"""Stage functions shared by the CLI and tests, plus the file formats the
stages use to hand results to each other."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .combine import Aft, aft_from_json, aft_to_json, combine_state
from .cve import CveRecord, synthesize_attack_trees
from .dsl import parse_bundle, serialize_bundle
from .model import AttackTree
from .transform import (
    ModelState, RejectedApplication, StateSpace, Transition, Violation, as_binding,
)


def attack_trees_for(state: ModelState, records: Optional[Sequence[CveRecord]]):
    """Authored attack trees plus ones synthesised for this state's deployment.
    Authored trees win on a name clash."""
    trees: List[AttackTree] = list(state.bundle.attack_trees)
    diags = []
    if records:
        synth, diags = synthesize_attack_trees(records, state.bundle.deployment)
        names = {t.name for t in trees}
        trees.extend(t for t in synth if t.name not in names)
    return sorted(trees, key=lambda t: t.name), diags


def combine_space(space: StateSpace, records: Optional[Sequence[CveRecord]] = None
                  ) -> Dict[str, List[Aft]]:
    out = {}
    for h in sorted(space.states):
        state = space.states[h]
        trees, _ = attack_trees_for(state, records)
        out[h] = combine_state(state, trees)
    return out


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def space_to_json(space: StateSpace) -> dict:
    return {
        "initial": space.initial,
        "exhausted": space.exhausted,
        "states": [{"hash": h, "depth": space.depth.get(h, 0),
                    "documents": serialize_bundle(space.states[h].bundle)}
                   for h in sorted(space.states, key=lambda x: (space.depth.get(x, 0), x))],
        "transitions": [{"source": t.source, "rule": t.rule, "binding": dict(t.binding), "target": t.target}
                        for t in space.transitions],
        "violations": [{"state": v.state, "invariant": v.invariant, "binding": dict(v.binding)}
                       for v in space.violations],
        "rejected": [{"state": r.state, "rule": r.rule, "binding": dict(r.binding), "reason": r.reason}
                     for r in space.rejected],
    }


def space_from_json(d) -> StateSpace:
    states, depth = {}, {}
    for s in d["states"]:
        state = ModelState.of(parse_bundle(s["documents"]))
        if state.hash != s["hash"]:
            raise ValueError(f"state {s['hash'][:10]} does not match its documents")
        states[state.hash] = state
        depth[state.hash] = s.get("depth", 0)
    return StateSpace(
        states,
        [Transition(t["source"], t["rule"], as_binding(t["binding"]), t["target"]) for t in d["transitions"]],
        d["initial"],
        [Violation(v["state"], v["invariant"], as_binding(v["binding"])) for v in d["violations"]],
        d.get("exhausted", False),
        [RejectedApplication(r["state"], r["rule"], as_binding(r["binding"]), r["reason"])
         for r in d.get("rejected", ())],
        depth)


def afts_to_json(afts: Dict[str, List[Aft]]) -> dict:
    return {"states": {h: [aft_to_json(a) for a in afts[h]] for h in sorted(afts)}}


def afts_from_json(d) -> Dict[str, List[Aft]]:
    return {h: [aft_from_json(a) for a in lst] for h, lst in d["states"].items()}


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
