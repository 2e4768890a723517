"""Domain types shared by every stage of the pipeline.

All types are frozen dataclasses.  Collections are normalised to sorted
tuples on construction so that structural equality does not depend on the
order in which elements were inserted.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Tuple


class ImpactLevel(enum.IntEnum):
    NONE = 0
    LOW = 1
    HIGH = 2

    @property
    def code(self) -> str:
        return "NLH"[self.value]

    @property
    def title(self) -> str:
        return ("None", "Low", "High")[self.value]

    @classmethod
    def from_code(cls, code: str) -> "ImpactLevel":
        return cls("NLH".index(code))

    @classmethod
    def from_title(cls, title: str) -> "ImpactLevel":
        try:
            return cls(("none", "low", "high").index(title.lower()))
        except ValueError:
            raise ValueError(f"unknown impact level {title!r}") from None


class RequirementMode(enum.Enum):
    ALL = "All"
    ANY = "Any"


@dataclass(frozen=True)
class Impact:
    """A confidentiality/integrity/availability triple."""

    confidentiality: ImpactLevel = ImpactLevel.NONE
    integrity: ImpactLevel = ImpactLevel.NONE
    availability: ImpactLevel = ImpactLevel.NONE

    def levels(self) -> Tuple[ImpactLevel, ImpactLevel, ImpactLevel]:
        return (self.confidentiality, self.integrity, self.availability)

    def join(self, other: "Impact") -> "Impact":
        return Impact(*(max(a, b) for a, b in zip(self.levels(), other.levels())))


@dataclass(frozen=True)
class ImpactRequirement:
    """Minimum C/I/A impact a link demands (or, on a Causes link, provides)."""

    confidentiality: ImpactLevel = ImpactLevel.NONE
    integrity: ImpactLevel = ImpactLevel.NONE
    availability: ImpactLevel = ImpactLevel.NONE
    mode: RequirementMode = RequirementMode.ALL

    def levels(self) -> Tuple[ImpactLevel, ImpactLevel, ImpactLevel]:
        return (self.confidentiality, self.integrity, self.availability)

    def as_impact(self) -> Impact:
        return Impact(*self.levels())


NO_REQUIREMENT = ImpactRequirement()


class ElementKind(enum.Enum):
    COMPONENT = "Component"
    CHANNEL = "Channel"
    PROTOCOL = "Protocol"
    LIBRARY = "Library"
    PLATFORM = "Platform"
    HARDWARE = "Hardware"
    PROXY = "Proxy"


DATAFLOW_KINDS = frozenset({ElementKind.COMPONENT, ElementKind.CHANNEL})


@dataclass(frozen=True)
class Component:
    name: str


@dataclass(frozen=True)
class Channel:
    name: str
    senders: frozenset = frozenset()
    receivers: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "senders", frozenset(self.senders))
        object.__setattr__(self, "receivers", frozenset(self.receivers))


def _sorted_by_name(items):
    return tuple(sorted(items, key=lambda x: x.name))


@dataclass(frozen=True)
class DataflowGraph:
    components: Tuple[Component, ...] = ()
    channels: Tuple[Channel, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "components", _sorted_by_name(self.components))
        object.__setattr__(self, "channels", _sorted_by_name(self.channels))

    def component_names(self) -> frozenset:
        return frozenset(c.name for c in self.components)

    def channel(self, name: str) -> Optional[Channel]:
        for ch in self.channels:
            if ch.name == name:
                return ch
        return None


@dataclass(frozen=True)
class DeploymentElement:
    name: str
    kind: ElementKind
    cpe: Optional[str] = None
    attributes: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        attrs = self.attributes
        if isinstance(attrs, Mapping):
            attrs = attrs.items()
        object.__setattr__(self, "attributes", tuple(sorted(attrs)))

    def attr(self, key: str, default: Optional[str] = None) -> Optional[str]:
        for k, v in self.attributes:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class DeploymentModel:
    elements: Tuple[DeploymentElement, ...] = ()
    depends: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "elements", _sorted_by_name(self.elements))
        object.__setattr__(self, "depends", frozenset(self.depends))

    def element(self, name: str) -> Optional[DeploymentElement]:
        for el in self.elements:
            if el.name == name:
                return el
        return None

    def names(self) -> frozenset:
        return frozenset(el.name for el in self.elements)

    def successors(self, name: str) -> Tuple[str, ...]:
        return tuple(sorted(b for a, b in self.depends if a == name))


class NodeKind(enum.Enum):
    TOP_EVENT = "TopEvent"
    INTERMEDIATE_EVENT = "IntermediateEvent"
    BASIC_EVENT = "BasicEvent"
    BASIC_ATTACK_STEP = "BasicAttackStep"
    EXTERNAL_EVENT = "ExternalEvent"
    # only inside combination fragments and assembled AFTs
    PORT = "Port"
    TRUE = "True"


TREE_NODE_KINDS = frozenset(list(NodeKind)[:5])


class Direction(enum.Enum):
    REQUIRES = "Requires"
    CAUSES = "Causes"


class GateKind(enum.Enum):
    AND = "AND"
    OR = "OR"


@dataclass(frozen=True)
class TreeNode:
    id: str
    label: str
    kind: NodeKind
    cve_id: Optional[str] = None
    vector: Optional["CvssVector"] = None  # noqa: F821  (defined in cvss)
    target: Optional[str] = None
    requirement: Optional[ImpactRequirement] = None
    direction: Optional[Direction] = None


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    output: str
    inputs: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))


@dataclass(frozen=True)
class Tree:
    name: str
    root: str
    nodes: Tuple[TreeNode, ...] = ()
    gates: Tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(self, "gates", tuple(sorted(self.gates, key=lambda g: g.output)))

    def node(self, node_id: str) -> TreeNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def gate_for(self, node_id: str) -> Optional[Gate]:
        for g in self.gates:
            if g.output == node_id:
                return g
        return None

    def leaves(self) -> Tuple[TreeNode, ...]:
        outputs = {g.output for g in self.gates}
        return tuple(n for n in self.nodes if n.id not in outputs)


class FaultTree(Tree):
    pass


class AttackTree(Tree):
    pass


class Action(enum.Enum):
    PRESERVE = "preserve"
    DELETE = "delete"
    CREATE = "create"
    FORBID = "forbid"


EDGE_LABELS = frozenset({"depends", "sends", "receives"})


def is_variable(name: str) -> bool:
    return name.startswith("?")


@dataclass(frozen=True)
class PatternNode:
    name: str
    kind: ElementKind
    action: Action = Action.PRESERVE


@dataclass(frozen=True)
class PatternEdge:
    source: str
    target: str
    label: str
    action: Action = Action.PRESERVE

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.source, self.target, self.label)


@dataclass(frozen=True)
class GraphPattern:
    nodes: Tuple[PatternNode, ...] = ()
    edges: Tuple[PatternEdge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    def nodes_with(self, *actions: Action) -> Tuple[PatternNode, ...]:
        return tuple(n for n in self.nodes if n.action in actions)

    def edges_with(self, *actions: Action) -> Tuple[PatternEdge, ...]:
        return tuple(e for e in self.edges if e.action in actions)

    def node(self, name: str) -> Optional[PatternNode]:
        for n in self.nodes:
            if n.name == name:
                return n
        return None


@dataclass(frozen=True)
class TransformationRule:
    name: str
    pattern: GraphPattern


@dataclass(frozen=True)
class Invariant:
    """A named forbidden pattern: any match is a violation."""

    name: str
    pattern: GraphPattern


class ResolutionKind(enum.Enum):
    ATTACK_ROOT = "AttackRoot"
    FAULT_EVENT = "FaultEvent"
    ATTRIBUTE_TRUE = "AttributeTrue"
    CONSTITUENTS = "Constituents"


@dataclass(frozen=True)
class Resolution:
    """How a fragment port is connected during assembly.

    ``Constituents`` carries an ``inner`` resolution that applies to each
    expanded sub-port; ``AttributeTrue`` carries the attribute name.
    """

    kind: ResolutionKind
    attribute: Optional[str] = None
    inner: Optional["Resolution"] = None

    def __str__(self) -> str:
        if self.kind is ResolutionKind.ATTRIBUTE_TRUE:
            return f"AttributeTrue:{self.attribute}"
        if self.kind is ResolutionKind.CONSTITUENTS:
            return f"Constituents:{self.inner}"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "Resolution":
        head, _, rest = text.partition(":")
        try:
            kind = ResolutionKind(head)
        except ValueError:
            raise ValueError(f"unknown resolution {text!r}") from None
        if kind is ResolutionKind.ATTRIBUTE_TRUE:
            if not rest:
                raise ValueError("AttributeTrue needs an attribute name")
            return cls(kind, attribute=rest)
        if kind is ResolutionKind.CONSTITUENTS:
            inner = cls.parse(rest) if rest else cls(ResolutionKind.ATTRIBUTE_TRUE, "unauthenticated")
            if inner.kind is ResolutionKind.CONSTITUENTS:
                raise ValueError("Constituents cannot nest")
            return cls(kind, inner=inner)
        if rest:
            raise ValueError(f"{head} takes no argument")
        return cls(kind)


@dataclass(frozen=True)
class Port:
    id: str
    var: str
    direction: Direction
    requirement: ImpactRequirement = NO_REQUIREMENT
    resolution: Optional[Resolution] = None


@dataclass(frozen=True)
class FragmentTemplate:
    """Tree template of a combination rule.  Node labels may contain
    ``{?var}`` placeholders; nodes whose id names a port are port nodes."""

    root: str
    nodes: Tuple[TreeNode, ...] = ()
    gates: Tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(self, "gates", tuple(sorted(self.gates, key=lambda g: g.output)))


@dataclass(frozen=True)
class CombinationRule:
    name: str
    source: str
    pattern: GraphPattern
    fragment: FragmentTemplate
    ports: Tuple[Port, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(sorted(self.ports, key=lambda p: p.id)))

    def port(self, port_id: str) -> Optional[Port]:
        for p in self.ports:
            if p.id == port_id:
                return p
        return None


@dataclass(frozen=True)
class ModelBundle:
    dataflow: DataflowGraph = field(default_factory=DataflowGraph)
    deployment: DeploymentModel = field(default_factory=DeploymentModel)
    fault_trees: Tuple[FaultTree, ...] = ()
    attack_trees: Tuple[AttackTree, ...] = ()
    transformation_rules: Tuple[TransformationRule, ...] = ()
    combination_rules: Tuple[CombinationRule, ...] = ()
    invariants: Tuple[Invariant, ...] = ()

    def __post_init__(self):
        for name in ("fault_trees", "attack_trees", "transformation_rules",
                     "combination_rules", "invariants"):
            object.__setattr__(self, name, _sorted_by_name(getattr(self, name)))

    def replace(self, **changes) -> "ModelBundle":
        from dataclasses import replace
        return replace(self, **changes)


def element_names(bundle: ModelBundle) -> frozenset:
    """Names addressable by external events: dataflow plus deployment."""
    df = bundle.dataflow
    return (frozenset(c.name for c in df.components)
            | frozenset(c.name for c in df.channels)
            | bundle.deployment.names())


def merge_attack_trees(bundle: ModelBundle, extra: Iterable[AttackTree]) -> ModelBundle:
    known = {t.name for t in bundle.attack_trees}
    added = [t for t in extra if t.name not in known]
    return bundle.replace(attack_trees=bundle.attack_trees + tuple(added))
