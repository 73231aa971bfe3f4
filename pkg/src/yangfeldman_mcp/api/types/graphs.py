"""
Type definitions for extended Feynman graphs.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Tuple

from .trees import FieldType, Label, Tree


class EdgeKind(str, Enum):
    GR = "Gr"
    D = "D"
    DPLUS = "Dplus"
    DTILDE = "Dtilde"


@dataclass(frozen=True, order=True)
class Endpoint:
    """An external point (by position) or an internal vertex (by number)."""
    kind: str
    index: int

    @property
    def is_external(self) -> bool:
        return self.kind == "external"


@dataclass(frozen=True)
class GraphEdge:
    """
    A directed propagator line, evaluated as kind(source, target).

    Gr lines run from the parent (or external point) to the child vertex, so the
    causal flow points to the root. Dplus lines run from the leaf with the lower
    label to the leaf with the higher one.
    """
    kind: EdgeKind
    source: Endpoint
    target: Endpoint


@dataclass(frozen=True)
class ExtendedGraph:
    externals: Tuple[Tuple[int, FieldType], ...]
    n_internal: int
    edges: Tuple[GraphEdge, ...]
    trees: Tuple[Tree, ...]
    pairing: Tuple[Tuple[Label, Label], ...]
    vertex_labels: Tuple[Label, ...] = ()

    def degree(self, endpoint: Endpoint) -> int:
        return sum((edge.source == endpoint) + (edge.target == endpoint) for edge in self.edges)


@dataclass
class WightmanResult:
    """Truncated Wightman function at one perturbative order."""
    types: Tuple[FieldType, ...]
    points: Tuple[int, ...]
    order: int
    p: int
    value: complex
    graphs_enumerated: int
    breakdown: List[Dict[str, Any]] = field(default_factory=list)
