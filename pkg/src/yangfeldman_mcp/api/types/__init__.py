"""
Type definitions for the Yang-Feldman engine.
"""

from .lattice import CausalRelation, LatticeConfig, LatticeSpacetime
from .propagators import ModeBasis, PropagatorSet
from .trees import FieldType, Label, Tree, TreeNode
from .graphs import EdgeKind, Endpoint, ExtendedGraph, GraphEdge, WightmanResult
from .algebra import FieldSeries, LocalOperator, Monomial, WickPolynomial
from .functional import Functional
from .fock import FockStateAmplitudes, ReconstructionResult, TriangularSystem
from .experiment import ExperimentConfig, RunConfig, TheoryConfig

__all__ = [
    "CausalRelation",
    "LatticeConfig",
    "LatticeSpacetime",
    "ModeBasis",
    "PropagatorSet",
    "FieldType",
    "Label",
    "Tree",
    "TreeNode",
    "EdgeKind",
    "Endpoint",
    "ExtendedGraph",
    "GraphEdge",
    "WightmanResult",
    "FieldSeries",
    "LocalOperator",
    "Monomial",
    "WickPolynomial",
    "Functional",
    "FockStateAmplitudes",
    "ReconstructionResult",
    "TriangularSystem",
    "ExperimentConfig",
    "RunConfig",
    "TheoryConfig",
]
