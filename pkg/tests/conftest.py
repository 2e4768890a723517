import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
QUAD = FIXTURES / "quadcopter"
FEED = FIXTURES / "cves.json"
BUGGY = FIXTURES / "buggy.rules"

sys.path.insert(0, str(Path(__file__).parent))

from aftco.cve import load_cve_records  # noqa: E402
from aftco.dsl import load_bundle  # noqa: E402
from aftco.transform import ModelState  # noqa: E402


@pytest.fixture
def quad_bundle():
    return load_bundle(QUAD)


@pytest.fixture
def quad_state(quad_bundle):
    return ModelState.of(quad_bundle)


@pytest.fixture
def records():
    recs, diags = load_cve_records([FEED])
    assert not diags
    return recs
