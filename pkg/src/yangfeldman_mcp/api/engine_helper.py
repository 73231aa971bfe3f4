"""
Helper functions for setting up the engine from an experiment configuration.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .backends import get_backend
from .ccr_algebra import CCRAlgebra
from .graphs import interaction_weights
from .lattice import build_lattice
from .propagators import build_propagators
from .types import ExperimentConfig, LatticeSpacetime, PropagatorSet

logger = logging.getLogger(__name__)


@dataclass
class EngineContext:
    """
    Context class that holds the lattice, its propagators and the vertex measure
    for one configuration. The operator algebra is built on first use.
    """
    config: ExperimentConfig
    lattice: LatticeSpacetime
    propagators: PropagatorSet
    vertex_weights: np.ndarray
    _algebra: Optional[CCRAlgebra] = field(default=None, repr=False)

    @property
    def algebra(self) -> CCRAlgebra:
        if self._algebra is None:
            self._algebra = CCRAlgebra(self.propagators, switching=self.config.theory.switching)
        return self._algebra

    @property
    def p(self) -> int:
        return self.config.theory.p


def init_engine(config: ExperimentConfig, with_modes: bool = True, backend: Optional[str] = None) -> EngineContext:
    """
    Build lattice and propagators for a configuration.

    Args:
        config: The experiment configuration.
        with_modes: Also build the mode basis and two-point functions.
        backend: Overrides config.run.backend.

    Returns:
        The EngineContext.

    Raises:
        LatticeConfigError: If the lattice parameters are invalid.
        ConfigError: If the backend or switching profile is unknown.
    """
    lattice = build_lattice(config.lattice)
    number_backend = get_backend(backend or config.run.backend)
    propagators = build_propagators(lattice, number_backend, with_modes=with_modes)
    weights = interaction_weights(lattice, config.theory.switching)
    logger.info("Engine ready: %dx%d lattice, %s backend", lattice.nt, lattice.nx, number_backend.name)
    return EngineContext(config=config, lattice=lattice, propagators=propagators, vertex_weights=weights)
