"""CVSS 3.1 base vectors: parsing, canonical serialisation, base score and
the impact-compatibility check used when linking tree events."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

from .model import Impact, ImpactLevel, ImpactRequirement, RequirementMode

log = logging.getLogger(__name__)

PREFIX = "CVSS:3.1/"
BASE_METRICS = ("AV", "AC", "PR", "UI", "S", "C", "I", "A")
# temporal and environmental keys are accepted and dropped
NON_BASE_METRICS = frozenset(
    "E RL RC CR IR AR MAV MAC MPR MUI MS MC MI MA".split())


class AttackVector(enum.Enum):
    NETWORK = "N"
    ADJACENT = "A"
    LOCAL = "L"
    PHYSICAL = "P"


class AttackComplexity(enum.Enum):
    LOW = "L"
    HIGH = "H"


class PrivilegesRequired(enum.IntEnum):
    NONE = 0
    LOW = 1
    HIGH = 2

    @property
    def code(self):
        return "NLH"[self.value]


class UserInteraction(enum.Enum):
    NONE = "N"
    REQUIRED = "R"


class Scope(enum.Enum):
    UNCHANGED = "U"
    CHANGED = "C"


class CvssParseError(ValueError):
    def __init__(self, message: str, token: str = ""):
        super().__init__(message if not token else f"{message}: {token!r}")
        self.token = token


@dataclass(frozen=True)
class CvssVector:
    attack_vector: AttackVector = AttackVector.NETWORK
    attack_complexity: AttackComplexity = AttackComplexity.LOW
    privileges_required: PrivilegesRequired = PrivilegesRequired.NONE
    user_interaction: UserInteraction = UserInteraction.NONE
    scope: Scope = Scope.UNCHANGED
    confidentiality: ImpactLevel = ImpactLevel.NONE
    integrity: ImpactLevel = ImpactLevel.NONE
    availability: ImpactLevel = ImpactLevel.NONE

    @property
    def impact(self) -> Impact:
        return Impact(self.confidentiality, self.integrity, self.availability)

    def levels(self):
        return (self.confidentiality, self.integrity, self.availability)

    def __str__(self) -> str:
        return serialize(self)


_DECODERS = {
    "AV": AttackVector,
    "AC": AttackComplexity,
    "PR": lambda c: PrivilegesRequired("NLH".index(c)),
    "UI": UserInteraction,
    "S": Scope,
    "C": ImpactLevel.from_code,
    "I": ImpactLevel.from_code,
    "A": ImpactLevel.from_code,
}

_FIELDS = dict(zip(BASE_METRICS, (
    "attack_vector", "attack_complexity", "privileges_required",
    "user_interaction", "scope", "confidentiality", "integrity",
    "availability")))


def parse(text: str) -> CvssVector:
    """Decode a ``CVSS:3.1/...`` base vector string."""
    text = text.strip()
    if not text.startswith("CVSS:"):
        raise CvssParseError("malformed prefix", text.split("/", 1)[0])
    if not text.startswith(PREFIX):
        raise CvssParseError("unsupported version", text.split("/", 1)[0])
    values = {}
    for token in text[len(PREFIX):].split("/"):
        key, sep, code = token.partition(":")
        if not sep or not key or not code:
            raise CvssParseError("malformed metric", token)
        if key in NON_BASE_METRICS:
            log.warning("ignoring non-base CVSS metric %s", token)
            continue
        if key not in _DECODERS:
            raise CvssParseError("unknown metric key", token)
        if _FIELDS[key] in values:
            raise CvssParseError("duplicate metric", token)
        try:
            values[_FIELDS[key]] = _DECODERS[key](code)
        except ValueError:
            raise CvssParseError("invalid metric value", token) from None
    missing = [k for k in BASE_METRICS if _FIELDS[k] not in values]
    if missing:
        raise CvssParseError("missing metric", missing[0])
    return CvssVector(**values)


def serialize(v: CvssVector) -> str:
    codes = (v.attack_vector.value, v.attack_complexity.value,
             v.privileges_required.code, v.user_interaction.value,
             v.scope.value, v.confidentiality.code, v.integrity.code,
             v.availability.code)
    return PREFIX + "/".join(f"{k}:{c}" for k, c in zip(BASE_METRICS, codes))


_AV = {"N": 0.85, "A": 0.62, "L": 0.55, "P": 0.2}
_AC = {"L": 0.77, "H": 0.44}
_PR = {"U": (0.85, 0.62, 0.27), "C": (0.85, 0.68, 0.5)}
_UI = {"N": 0.85, "R": 0.62}
_CIA = (0.0, 0.22, 0.56)


def roundup(x: float) -> float:
    """CVSS 3.1 'Roundup': smallest one-decimal value >= x, computed on an
    integer grid so float noise like 4.000000000000001 does not round up."""
    scaled = round(x * 100000)
    if scaled % 10000 == 0:
        return scaled / 100000.0
    return (math.floor(scaled / 10000) + 1) / 10.0


def base_score(v: CvssVector) -> float:
    iss = 1 - math.prod(1 - _CIA[lvl] for lvl in v.levels())
    changed = v.scope is Scope.CHANGED
    if changed:
        impact = 7.52 * (iss - 0.029) - 3.25 * (iss - 0.02) ** 15
    else:
        impact = 6.42 * iss
    if impact <= 0:
        return 0.0
    exploitability = (8.22 * _AV[v.attack_vector.value] * _AC[v.attack_complexity.value]
                      * _PR[v.scope.value][v.privileges_required]
                      * _UI[v.user_interaction.value])
    if changed:
        return roundup(min(1.08 * (impact + exploitability), 10))
    return roundup(min(impact + exploitability, 10))


def impact_satisfies(v, r: ImpactRequirement) -> bool:
    """Does the C/I/A of ``v`` (a vector, Impact or requirement) meet ``r``?"""
    have = v.levels()
    need = r.levels()
    if r.mode is RequirementMode.ALL:
        return all(h >= n for h, n in zip(have, need))
    relevant = [(h, n) for h, n in zip(have, need) if n > ImpactLevel.NONE]
    if not relevant:
        return True
    return any(h >= n for h, n in relevant)
