"""
Type definitions for degree-truncated Wightman functionals.
"""

from dataclasses import dataclass
from typing import List

import numpy as np


@dataclass(frozen=True, eq=False)
class Functional:
    """
    Sequence (W_0, W_1, ..., W_N) with W_n a complex rank-n tensor over sites.

    weights are the lattice volume weights used by every contraction with test
    functions.
    """
    components: List[np.ndarray]
    degree_cap: int
    weights: np.ndarray

    def __post_init__(self):
        if len(self.components) != self.degree_cap + 1:
            raise ValueError(
                f"Functional with degree_cap={self.degree_cap} needs {self.degree_cap + 1} components, "
                f"got {len(self.components)}"
            )

    @property
    def n_sites(self) -> int:
        return len(self.weights)

    def __getitem__(self, n: int) -> np.ndarray:
        return self.components[n]

    @property
    def w0(self) -> complex:
        return complex(self.components[0])
