"""Offline CVE feed ingestion, CPE matching and attack tree synthesis.

Feed documents are JSON arrays of records::

    {"id": "CVE-2024-0001",
     "description": "...",
     "cvss31": "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H",
     "cwe": ["CWE-287"],
     "affected": [{"cpe": "cpe:2.3:a:mavlink:mavlink:*",
                   "versionStartIncluding": "1.0", "versionEndExcluding": "2.1"}]}

An NVD API 2.0 response object (``{"vulnerabilities": [...]}``) is also
accepted and mapped onto the same fields.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from . import cvss
from .cvss import CvssParseError, CvssVector, PrivilegesRequired
from .model import (
    AttackTree, DeploymentModel, Direction, Gate, GateKind, Impact, ImpactLevel,
    ImpactRequirement, NodeKind, TreeNode,
)
from .validate import Diagnostic, Severity, check_tree, errors

_CVE_ID = re.compile(r"^CVE-\d{4}-\d{4,}$")


@dataclass(frozen=True)
class VersionRange:
    start: Optional[str] = None
    start_inclusive: bool = True
    end: Optional[str] = None
    end_inclusive: bool = True

    def contains(self, version: str) -> bool:
        k = version_key(version)
        if self.start is not None:
            s = version_key(self.start)
            if k < s or (k == s and not self.start_inclusive):
                return False
        if self.end is not None:
            e = version_key(self.end)
            if k > e or (k == e and not self.end_inclusive):
                return False
        return True


@dataclass(frozen=True)
class Affected:
    cpe: str
    versions: Optional[VersionRange] = None


@dataclass(frozen=True)
class CveRecord:
    id: str
    affected: Tuple[Affected, ...]
    vector: CvssVector
    description: str = ""
    cwe_ids: Tuple[str, ...] = ()


def version_key(version: str):
    parts = re.split(r"[.\-_+]", version.strip().lower())
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in parts if p != "")


def split_cpe(cpe: str) -> List[str]:
    """Split a CPE 2.3 formatted string on unescaped colons."""
    parts, cur, i = [], [], 0
    while i < len(cpe):
        c = cpe[i]
        if c == "\\" and i + 1 < len(cpe):
            cur.append(cpe[i:i + 2])
            i += 2
            continue
        if c == ":":
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(c)
        i += 1
    parts.append("".join(cur))
    return parts


_VERSION_INDEX = 5  # cpe:2.3:part:vendor:product:version:...
_WILDCARDS = {"*", ""}


def match_cpe(record: CveRecord, element) -> bool:
    if not element.cpe:
        return False
    have = split_cpe(element.cpe)
    for aff in record.affected:
        want = split_cpe(aff.cpe)
        if len(want) > len(have) and any(w not in _WILDCARDS for w in want[len(have):]):
            continue
        if not all(w in _WILDCARDS or h in _WILDCARDS or w.lower() == h.lower()
                   for w, h in zip(want, have)):
            continue
        if aff.versions is not None and len(have) > _VERSION_INDEX:
            version = have[_VERSION_INDEX]
            if version not in _WILDCARDS and version != "-" and not aff.versions.contains(version):
                continue
        return True
    return False


def _range(entry) -> Optional[VersionRange]:
    keys = ("versionStartIncluding", "versionStartExcluding", "versionEndIncluding", "versionEndExcluding")
    if not any(k in entry for k in keys):
        return None
    start = entry.get("versionStartIncluding", entry.get("versionStartExcluding"))
    end = entry.get("versionEndIncluding", entry.get("versionEndExcluding"))
    return VersionRange(start, "versionStartExcluding" not in entry,
                        end, "versionEndExcluding" not in entry)


def _from_nvd(item) -> dict:
    cve = item.get("cve", item)
    vector = None
    for m in cve.get("metrics", {}).get("cvssMetricV31", []):
        vector = m.get("cvssData", {}).get("vectorString")
        if m.get("type") == "Primary":
            break
    desc = next((d.get("value", "") for d in cve.get("descriptions", []) if d.get("lang") == "en"), "")
    cwes = [d.get("value") for w in cve.get("weaknesses", []) for d in w.get("description", [])
            if str(d.get("value", "")).startswith("CWE-")]
    affected = []
    for conf in cve.get("configurations", []):
        for node in conf.get("nodes", []):
            for m in node.get("cpeMatch", []):
                if m.get("vulnerable", True):
                    entry = {"cpe": m["criteria"]}
                    entry.update({k: v for k, v in m.items() if k.startswith("version")})
                    affected.append(entry)
    return {"id": cve.get("id"), "description": desc, "cvss31": vector,
            "cwe": cwes, "affected": affected}


def parse_feed(text: str, source: str = "<feed>") -> Tuple[List[CveRecord], List[Diagnostic]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if isinstance(doc, dict) and "vulnerabilities" in doc:
        doc = [_from_nvd(v) for v in doc["vulnerabilities"]]
    if not isinstance(doc, list):
        raise ValueError(f"{source}: feed must be a JSON array of records")
    records, diags = [], []
    for i, raw in enumerate(doc):
        where = f"{source}[{i}]"
        if not isinstance(raw, dict):
            diags.append(Diagnostic(where, "cve-record", Severity.WARNING, "record is not an object"))
            continue
        rid = raw.get("id")
        if not isinstance(rid, str) or not _CVE_ID.match(rid):
            diags.append(Diagnostic(where, "cve-id", Severity.WARNING, f"bad or missing id {rid!r}"))
            continue
        vec_text = raw.get("cvss31")
        if not vec_text:
            diags.append(Diagnostic(rid, "cve-vector", Severity.WARNING, "no CVSS 3.1 vector; skipped"))
            continue
        try:
            vector = cvss.parse(vec_text)
        except CvssParseError as exc:
            diags.append(Diagnostic(rid, "cve-vector", Severity.WARNING, f"{exc}; skipped"))
            continue
        try:
            affected = tuple(Affected(a["cpe"], _range(a)) for a in raw.get("affected", ()))
        except (KeyError, TypeError):
            diags.append(Diagnostic(rid, "cve-affected", Severity.WARNING, "malformed affected entry"))
            continue
        records.append(CveRecord(rid, affected, vector, raw.get("description", ""),
                                 tuple(raw.get("cwe", ()))))
    return records, diags


def load_cve_records(documents: Iterable[Union[str, Path, Tuple[str, str]]]
                     ) -> Tuple[List[CveRecord], List[Diagnostic]]:
    """Load feeds given as paths or ``(name, text)`` pairs; sorted by id."""
    by_id: Dict[str, CveRecord] = {}
    diags: List[Diagnostic] = []
    for doc in documents:
        if isinstance(doc, tuple):
            name, text = doc
        else:
            name = str(doc)
            text = Path(doc).read_text(encoding="utf-8")
        recs, d = parse_feed(text, name)
        diags.extend(d)
        for r in recs:
            if r.id in by_id:
                diags.append(Diagnostic(r.id, "cve-unique", Severity.WARNING,
                                        f"duplicate record in {name}; first kept"))
                continue
            by_id[r.id] = r
    return [by_id[k] for k in sorted(by_id)], diags


def _grants_privilege(provider: CveRecord, target: CveRecord) -> bool:
    pv, tv = provider.vector, target.vector
    return (pv.privileges_required < tv.privileges_required
            and (pv.integrity is ImpactLevel.HIGH or pv.confidentiality is ImpactLevel.HIGH))


def attack_tree_name(element: str) -> str:
    return f"AT-{element}"


def synthesize_attack_trees(records: Sequence[CveRecord], deployment: DeploymentModel
                            ) -> Tuple[List[AttackTree], List[Diagnostic]]:
    """One attack tree per deployment element with matching CVEs.

    Steps requiring privileges are chained under an AND with an OR of the
    same element's CVEs that need strictly fewer privileges and have a high
    integrity or confidentiality impact.
    """
    trees, diags = [], []
    for el in deployment.elements:
        matching = sorted((r for r in records if match_cpe(r, el)), key=lambda r: r.id)
        if not matching:
            continue
        nodes: List[TreeNode] = []
        gates: List[Gate] = []
        used: List[CveRecord] = []

        def branch(rec: CveRecord, prefix: str) -> Optional[str]:
            if rec.vector.privileges_required is PrivilegesRequired.NONE:
                nid = prefix + rec.id
                nodes.append(TreeNode(nid, f"Exploit {rec.id}", NodeKind.BASIC_ATTACK_STEP,
                                      cve_id=rec.id, vector=rec.vector))
                used.append(rec)
                return nid
            subs = [branch(p, f"{prefix}{rec.id}/") for p in matching if _grants_privilege(p, rec)]
            subs = [s for s in subs if s is not None]
            if not subs:
                return None
            step = f"{prefix}{rec.id}"
            chain, grant = f"{step}#chain", f"{step}#privilege"
            nodes.append(TreeNode(step, f"Exploit {rec.id}", NodeKind.BASIC_ATTACK_STEP,
                                  cve_id=rec.id, vector=rec.vector))
            nodes.append(TreeNode(chain, f"Exploit {rec.id} with gained privileges",
                                  NodeKind.INTERMEDIATE_EVENT))
            nodes.append(TreeNode(grant, f"Gain {rec.vector.privileges_required.name.lower()} "
                                         f"privileges on {el.name}", NodeKind.INTERMEDIATE_EVENT))
            gates.append(Gate(GateKind.AND, chain, (step, grant)))
            gates.append(Gate(GateKind.OR, grant, tuple(subs)))
            used.append(rec)
            return chain

        children = []
        for rec in matching:
            b = branch(rec, "")
            if b is None:
                diags.append(Diagnostic(rec.id, "privilege-chain", Severity.WARNING,
                                        f"requires privileges on {el.name} but no CVE grants them; omitted"))
            else:
                children.append(b)
        if not children:
            continue
        caused = Impact()
        for rec in used:
            caused = caused.join(rec.vector.impact)
        req = ImpactRequirement(caused.confidentiality, caused.integrity, caused.availability)
        nodes.append(TreeNode("root", f"Attack on {el.name}", NodeKind.EXTERNAL_EVENT,
                              target=el.name, requirement=req, direction=Direction.CAUSES))
        gates.append(Gate(GateKind.OR, "root", tuple(children)))
        tree = AttackTree(attack_tree_name(el.name), "root", tuple(nodes), tuple(gates))
        problems = errors(check_tree(tree, is_attack=True))
        if problems:
            raise AssertionError(f"synthesised tree {tree.name} is malformed: {problems[0]}")
        trees.append(tree)
    return trees, diags
