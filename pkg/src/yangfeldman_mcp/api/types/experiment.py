"""
Type definitions for experiment configuration.
"""

from dataclasses import dataclass, field
from typing import Optional

from .lattice import LatticeConfig


@dataclass(frozen=True)
class TheoryConfig:
    p: int = 4
    coupling: float = 1.0
    sigma_max: int = 1
    switching: str = "none"


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "demo-nonquasifree"
    output: Optional[str] = None
    seed: int = 0
    backend: str = "float"
    jobs: int = 1
    identity: str = "all"
    order: int = 1
    instances: int = 10


@dataclass(frozen=True)
class ExperimentConfig:
    lattice: LatticeConfig
    theory: TheoryConfig = field(default_factory=TheoryConfig)
    run: RunConfig = field(default_factory=RunConfig)
