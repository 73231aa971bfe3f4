"""
Type definitions for propagator tables and the frequency split.
"""

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .lattice import LatticeSpacetime


@dataclass(frozen=True, eq=False)
class ModeBasis:
    """
    Positive-frequency modes of the flat in-region, evolved over the lattice.

    Solutions are described by coordinates in the basis
    V = (u_1..u_M, conj(u_1)..conj(u_M)); all operators below act on these
    2M-component coordinate vectors.
    """
    lattice: LatticeSpacetime
    modes: np.ndarray
    thetas: np.ndarray
    cauchy_sites: np.ndarray
    cauchy_inverse: np.ndarray
    kplus: np.ndarray
    kminus: np.ndarray
    j: np.ndarray
    sigma: np.ndarray
    inner_product: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def solution_basis(self) -> np.ndarray:
        """Rows u_1..u_M, conj(u_1)..conj(u_M) as site functions."""
        return np.concatenate([self.modes, self.modes.conj()], axis=0)


@dataclass(frozen=True, eq=False)
class PropagatorSet:
    """
    Fundamental solutions over site pairs.

    gr, ga, d and weights are backend arrays (float, or QQ objects for the exact
    backend); dplus, dminus and dtilde are always floating point and are None when
    no mode basis was built.
    """
    lattice: LatticeSpacetime
    backend: Any
    gr: np.ndarray
    ga: np.ndarray
    d: np.ndarray
    weights: np.ndarray
    dplus: Optional[np.ndarray] = None
    dminus: Optional[np.ndarray] = None
    dtilde: Optional[np.ndarray] = None
    basis: Optional[ModeBasis] = None

    @property
    def n_sites(self) -> int:
        return self.lattice.n_sites

    def gr_float(self) -> np.ndarray:
        return self.backend.to_float_array(self.gr)

    def d_float(self) -> np.ndarray:
        return self.backend.to_float_array(self.d)

    def weights_float(self) -> np.ndarray:
        return self.backend.to_float_array(self.weights)
