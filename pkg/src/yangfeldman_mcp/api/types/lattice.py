"""
Type definitions for the discretized spacetime.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

import numpy as np


class CausalRelation(str, Enum):
    """Relation of a first site to a second one."""
    PRECEDES = "precedes"
    SUCCEEDS = "succeeds"
    SPACELIKE = "spacelike"
    COINCIDENT = "coincident"


@dataclass(frozen=True)
class LatticeConfig:
    """Raw lattice parameters as read from a config file."""
    nt: int
    nx: int
    dt: float
    dx: float
    mass: float = 1.0
    epsilon: float = 0.0
    h_profile: str = "none"
    h_amplitude: float = 1.0
    h_center: float = 0.0
    h_width: float = 0.0


@dataclass(frozen=True, eq=False)
class LatticeSpacetime:
    """
    Periodic (1+1)D lattice with metric (1 + epsilon*h) * eta.

    Sites are numbered time-major: site = t * nx + x.
    """
    nt: int
    nx: int
    dt: float
    dx: float
    mass: float
    epsilon: float
    h: np.ndarray
    kappa: float = 0.0
    dim: int = 2
    h_profile: str = "none"
    config: LatticeConfig = field(default=None, repr=False)

    @property
    def n_sites(self) -> int:
        return self.nt * self.nx

    @property
    def is_flat(self) -> bool:
        return self.epsilon == 0.0 or not np.any(self.h)

    def site_index(self, t: int, x: int) -> int:
        return t * self.nx + (x % self.nx)

    def site_coords(self, site: int) -> Tuple[int, int]:
        return divmod(site, self.nx)

    def spatial_distance(self, x1: int, x2: int) -> int:
        """Periodic distance between two spatial indices, in sites."""
        d = abs(x1 - x2) % self.nx
        return min(d, self.nx - d)

    def conformal_factor(self) -> np.ndarray:
        """1 + epsilon*h as an (nt, nx) array."""
        return 1.0 + self.epsilon * self.h
