"""Attack-fault tree co-evolution for self-adaptive systems.

Explores the reconfiguration state space of a system model by graph
transformation, assembles one attack-fault tree per reachable state and
reports minimal cut sets that only appear in transient states.
"""
__version__ = "0.1.0"

from .analyze import brute_force_cut_sets, minimal_cut_sets, state_space_report
from .combine import assemble_aft, match_combination_rules, transitive_deps
from .cve import load_cve_records, match_cpe, synthesize_attack_trees
from .cvss import base_score as cvss_base_score
from .cvss import impact_satisfies
from .cvss import parse as cvss_parse
from .cvss import serialize as cvss_serialize
from .dsl import (
    load_bundle, parse_bundle, parse_deployment, parse_transformation_rule,
    serialize_bundle, serialize_deployment, serialize_transformation_rules,
)
from .transform import apply_rule, canonical_hash, explore, find_matches
from .validate import validate_bundle

__all__ = [
    "apply_rule", "assemble_aft", "brute_force_cut_sets", "canonical_hash", "cvss_base_score",
    "cvss_parse", "cvss_serialize", "explore", "find_matches", "impact_satisfies", "load_bundle",
    "load_cve_records", "match_combination_rules", "match_cpe", "minimal_cut_sets", "parse_bundle",
    "parse_deployment", "parse_transformation_rule", "serialize_bundle", "serialize_deployment",
    "serialize_transformation_rules", "state_space_report", "synthesize_attack_trees",
    "transitive_deps", "validate_bundle",
]
