"""Command line entry point: ``aftco <stage> ...``.

Exit codes: 0 clean, 1 findings (transient attack-only exposure or
invariant violations), 2 usage or stage errors.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from . import __version__
from .analyze import render_text, state_space_report
from .combine import UnknownElementError, aft_to_dot, transitive_deps
from .cve import load_cve_records
from .dsl import ParseError, attack_trees_document, load_bundle, parse_transformation_rules
from .pipeline import (
    afts_from_json, afts_to_json, attack_trees_for, combine_space, dumps, read_json,
    space_from_json, space_to_json,
)
from .transform import ModelState, explore, state_cap_from_env, state_space_dot
from .validate import Severity, validate_bundle

log = logging.getLogger("aftco")

EXIT_OK, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2


class StageError(Exception):
    pass


@dataclass
class PipelineConfig:
    bundle: Path
    feed: Optional[Path]
    max_depth: int
    state_cap: int
    out: Path
    dot: bool = True
    json: bool = True
    allow_exposure: bool = False
    extra_rules: tuple = ()

    def check(self):
        if not self.bundle.is_dir():
            raise StageError(f"bundle directory {self.bundle} does not exist")
        for p in ([self.feed] if self.feed else []) + list(self.extra_rules):
            if not p.is_file():
                raise StageError(f"{p} is not a readable file")
        if self.max_depth < 0:
            raise StageError("--max-depth must be >= 0")
        if self.state_cap < 1:
            raise StageError("--state-cap must be positive")


def _load(bundle_dir, extra_rules=()):
    bundle = load_bundle(bundle_dir)
    if extra_rules:
        rules = list(bundle.transformation_rules)
        for path in extra_rules:
            rules.extend(parse_transformation_rules(Path(path).read_text(encoding="utf-8"), str(path)))
        bundle = bundle.replace(transformation_rules=tuple(rules))
    return bundle


def _records(feed):
    if feed is None:
        return []
    records, diags = load_cve_records([feed])
    for d in diags:
        log.warning("%s", d)
    return records


def _write(path: Path, text: str, written: List[Path]):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    written.append(path)


def cmd_validate(args) -> int:
    diags = validate_bundle(_load(args.bundle))
    for d in diags:
        print(d)
    return EXIT_ERROR if any(d.severity is Severity.ERROR for d in diags) else EXIT_OK


def cmd_deps(args) -> int:
    bundle = _load(args.bundle)
    try:
        deps = transitive_deps(bundle.deployment, args.element)
    except UnknownElementError:
        print(f"unknown element {args.element!r}", file=sys.stderr)
        return EXIT_ERROR
    for name in deps:
        print(name)
    return EXIT_OK


def cmd_synth(args) -> int:
    bundle = _load(args.bundle)
    trees, diags = attack_trees_for(ModelState.of(bundle.replace(attack_trees=())), _records(args.feed))
    for d in diags:
        log.warning("%s", d)
    Path(args.out).write_text(attack_trees_document(trees), encoding="utf-8")
    print(f"{len(trees)} attack trees written to {args.out}")
    return EXIT_OK


def _explore(bundle, max_depth, state_cap):
    diags = [d for d in validate_bundle(bundle) if d.severity is Severity.ERROR]
    if diags:
        raise StageError(f"invalid bundle: {diags[0]}")
    return explore(ModelState.of(bundle), bundle.transformation_rules, bundle.invariants,
                   max_depth=max_depth, state_cap=state_cap)


def cmd_explore(args) -> int:
    bundle = _load(args.bundle, args.extra_rules)
    space = _explore(bundle, args.max_depth, args.state_cap)
    Path(args.out).write_text(dumps(space_to_json(space)), encoding="utf-8")
    if args.dot:
        Path(args.dot).write_text(state_space_dot(space), encoding="utf-8")
    print(f"{len(space.states)} states, {len(space.transitions)} transitions, "
          f"{len(space.violations)} violations{' (exhausted)' if space.exhausted else ''}")
    return EXIT_FINDINGS if space.violations else EXIT_OK


def cmd_combine(args) -> int:
    space = space_from_json(read_json(args.space))
    afts = combine_space(space, _records(args.feed))
    Path(args.out).write_text(dumps(afts_to_json(afts)), encoding="utf-8")
    print(f"AFTs for {len(afts)} states written to {args.out}")
    return EXIT_OK


def _exit_for(report, allow_exposure) -> int:
    if report.violations:
        return EXIT_FINDINGS
    if report.attack_only_exposure and not allow_exposure:
        return EXIT_FINDINGS
    return EXIT_OK


def cmd_analyze(args) -> int:
    space = space_from_json(read_json(args.space))
    afts = afts_from_json(read_json(args.afts))
    report = state_space_report(space, afts)
    Path(args.out).write_text(dumps(report.to_json()), encoding="utf-8")
    text = render_text(report)
    if args.text:
        Path(args.text).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return _exit_for(report, args.allow_exposure)


def cmd_export_dot(args) -> int:
    if not args.space and not args.afts:
        raise StageError("give --space and/or --afts")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.space:
        space = space_from_json(read_json(args.space))
        (out / "statespace.dot").write_text(state_space_dot(space), encoding="utf-8")
    if args.afts:
        for h, afts in afts_from_json(read_json(args.afts)).items():
            for aft in afts:
                (out / f"{h[:10]}-{aft.name}.dot").write_text(aft_to_dot(aft), encoding="utf-8")
    return EXIT_OK


def run(config: PipelineConfig) -> int:
    """All stages end to end; writes a manifest even when a stage fails."""
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    stages = []
    manifest = {"version": __version__, "stages": stages, "failed_stage": None}

    def stage(name, fn):
        try:
            result = fn()
        except Exception as exc:
            stages.append({"name": name, "status": "failed", "error": str(exc)})
            manifest["failed_stage"] = name
            raise StageError(f"{name}: {exc}") from exc
        stages.append({"name": name, "status": "ok"})
        return result

    code = EXIT_ERROR
    try:
        config.check()
        bundle = stage("validate", lambda: _load(config.bundle, config.extra_rules))
        diags = validate_bundle(bundle)
        for d in diags:
            log.warning("%s", d)
        records = stage("synth-attack-trees", lambda: _records(config.feed))
        space = stage("explore", lambda: _explore(bundle, config.max_depth, config.state_cap))
        _write(out / "space.json", dumps(space_to_json(space)), written)
        afts = stage("combine", lambda: combine_space(space, records))
        for h in sorted(afts):
            if config.json:
                _write(out / "afts" / f"{h[:10]}.json", dumps(afts_to_json({h: afts[h]})), written)
            if config.dot:
                for aft in afts[h]:
                    _write(out / "afts" / f"{h[:10]}-{aft.name}.dot", aft_to_dot(aft), written)
        if config.dot:
            _write(out / "statespace.dot", state_space_dot(space), written)
        report = stage("analyze", lambda: state_space_report(space, afts))
        _write(out / "report.json", dumps(report.to_json()), written)
        _write(out / "report.txt", render_text(report), written)
        code = _exit_for(report, config.allow_exposure)
    except (StageError, ParseError, OSError) as exc:
        log.error("%s", exc)
        code = EXIT_ERROR
    manifest["exit_code"] = code
    manifest["artifacts"] = sorted(p.relative_to(out).as_posix() for p in written)
    (out / "manifest.json").write_text(dumps(manifest), encoding="utf-8")
    return code


def cmd_run(args) -> int:
    return run(PipelineConfig(
        bundle=Path(args.bundle), feed=Path(args.feed) if args.feed else None,
        max_depth=args.max_depth, state_cap=args.state_cap, out=Path(args.out),
        dot=not args.no_dot, json=not args.no_json, allow_exposure=args.allow_exposure,
        extra_rules=tuple(Path(p) for p in args.extra_rules)))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aftco", description="Attack-fault tree co-evolution across adaptation steps.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def bundle_arg(sp):
        sp.add_argument("--bundle", required=True, help="bundle directory")

    def explore_args(sp):
        sp.add_argument("--max-depth", type=int, default=10)
        sp.add_argument("--state-cap", type=int, default=state_cap_from_env(),
                        help="state budget (env AFTCO_STATE_CAP)")
        sp.add_argument("--extra-rules", action="append", default=[], metavar="FILE",
                        help="additional .rules file (repeatable)")

    sp = sub.add_parser("validate", help="check a bundle")
    bundle_arg(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("deps", help="print the transitive dependencies of an element")
    bundle_arg(sp)
    sp.add_argument("--element", required=True)
    sp.set_defaults(func=cmd_deps)

    sp = sub.add_parser("synth-attack-trees", help="generate attack trees from a CVE feed")
    bundle_arg(sp)
    sp.add_argument("--feed", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("explore", help="explore the adaptation state space")
    bundle_arg(sp)
    explore_args(sp)
    sp.add_argument("--out", required=True, help="state space JSON")
    sp.add_argument("--dot", help="also write the state space as DOT")
    sp.set_defaults(func=cmd_explore)

    sp = sub.add_parser("combine", help="assemble per-state AFTs")
    sp.add_argument("--space", required=True)
    sp.add_argument("--feed")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_combine)

    sp = sub.add_parser("analyze", help="cut sets and transient exposure report")
    sp.add_argument("--space", required=True)
    sp.add_argument("--afts", required=True)
    sp.add_argument("--out", required=True, help="report JSON")
    sp.add_argument("--text", help="rendered summary (default: stdout)")
    sp.add_argument("--allow-exposure", action="store_true")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("export-dot", help="state space and AFTs as DOT files")
    sp.add_argument("--space")
    sp.add_argument("--afts")
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_export_dot)

    sp = sub.add_parser("run", help="all stages end to end")
    bundle_arg(sp)
    sp.add_argument("--feed")
    explore_args(sp)
    sp.add_argument("--out", default="out")
    sp.add_argument("--no-dot", action="store_true")
    sp.add_argument("--no-json", action="store_true")
    sp.add_argument("--allow-exposure", action="store_true",
                    help="do not fail on attack-only transient exposure")
    sp.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (StageError, ParseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
