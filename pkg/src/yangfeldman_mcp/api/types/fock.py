"""
Type definitions for Fock-space amplitudes and the triangular system.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass
class FockStateAmplitudes:
    """
    Psi = sum_n a^dagger(S f_n) Omega with purely positive-frequency f_n.

    coefficients[n] is the symmetric rank-n mode tensor c_n of S_+^{n} f_n,
    f[n] the corresponding test-function tensor over sites and solutions[n] the
    solution part S_+^{n} f_n over sites. Index 0 holds scalars.
    """
    coefficients: List[np.ndarray]
    f: List[np.ndarray] = field(default_factory=list)
    solutions: List[np.ndarray] = field(default_factory=list)

    @property
    def n_max(self) -> int:
        return len(self.coefficients) - 1


@dataclass(frozen=True)
class TriangularSystem:
    """
    Upper triangular c_{s,r} over degrees of one parity and its exact inverse.

    c and d_inv are sympy matrices of rationals indexed like degrees.
    """
    parity: int
    r_max: int
    degrees: List[int]
    c: Any
    d_inv: Any

    def position(self, degree: int) -> int:
        return self.degrees.index(degree)

    def c_entry(self, s: int, r: int):
        return self.c[self.position(s), self.position(r)]

    def d_entry(self, s: int, r: int):
        return self.d_inv[self.position(s), self.position(r)]


@dataclass
class ReconstructionResult:
    amplitudes: FockStateAmplitudes
    branch: str
    reference: Optional[tuple] = None
    details: Dict[str, Any] = field(default_factory=dict)
