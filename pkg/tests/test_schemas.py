import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, given, settings

from aftco.dsl import attack_trees_document, serialize_bundle
from aftco.cve import synthesize_attack_trees
from conftest import FEED, QUAD, ROOT
from strategies import bundles

jsonschema = pytest.importorskip("jsonschema")

SCHEMAS = ROOT / "docs" / "schemas"
BY_SECTION = {"dataflow": "dataflow", "fault-trees": "fault_trees", "attack-trees": "attack_trees",
              "combination-rules": "combination_rules", "invariants": "invariants"}


def validator(stem):
    schema = json.loads((SCHEMAS / f"{stem}.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    return jsonschema.Draft202012Validator(schema)


def check_document(text):
    doc = json.loads(text)
    errors = sorted(validator(BY_SECTION[doc["section"]]).iter_errors(doc), key=str)
    assert not errors, errors[0]


@pytest.mark.parametrize("path", sorted(QUAD.glob("*.json")), ids=lambda p: p.name)
def test_fixture_documents(path):
    check_document(path.read_text())


def test_feed_fixture():
    validator("feed").validate(json.loads(FEED.read_text()))


def test_synthesized_trees_document(quad_bundle, records):
    trees, _ = synthesize_attack_trees(records, quad_bundle.deployment)
    check_document(attack_trees_document(trees))


def test_schema_rejects_unknown_kind():
    doc = json.loads((QUAD / "fault_trees.json").read_text())
    doc["trees"][0]["nodes"][0]["kind"] = "Gremlin"
    assert not validator("fault_trees").is_valid(doc)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(bundles())
def test_serialized_bundles_conform(bundle):
    for name, text in serialize_bundle(bundle).items():
        if name.endswith(".json"):
            check_document(text)
