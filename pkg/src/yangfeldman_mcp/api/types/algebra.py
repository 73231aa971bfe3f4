"""
Type definitions for polynomials in the in-field.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Mapping, Tuple

Monomial = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class WickPolynomial:
    """
    Finite sum of coefficient * phi_in(s_1)...phi_in(s_k) with s_1 <= ... <= s_k.

    Coefficients are backend numbers (complex, or Gaussian rationals for the exact
    backend). Zero coefficients are never stored, so the zero polynomial has no terms.
    """
    terms: Mapping[Monomial, Any]
    backend: Any

    def __iter__(self) -> Iterator[Tuple[Monomial, Any]]:
        return iter(self.terms.items())

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((len(mono) for mono in self.terms), default=0)

    def coefficient(self, monomial: Monomial) -> Any:
        return self.terms.get(tuple(monomial), self.backend.zero)

    def _combine(self, other: "WickPolynomial", sign: int) -> "WickPolynomial":
        out: Dict[Monomial, Any] = dict(self.terms)
        for mono, coeff in other.terms.items():
            value = out.get(mono, self.backend.zero)
            value = value + coeff if sign > 0 else value - coeff
            if not value:
                out.pop(mono, None)
            else:
                out[mono] = value
        return WickPolynomial(out, self.backend)

    def __add__(self, other: "WickPolynomial") -> "WickPolynomial":
        return self._combine(other, 1)

    def __sub__(self, other: "WickPolynomial") -> "WickPolynomial":
        return self._combine(other, -1)

    def __neg__(self) -> "WickPolynomial":
        return WickPolynomial({mono: -coeff for mono, coeff in self.terms.items()}, self.backend)

    def scale(self, factor: Any) -> "WickPolynomial":
        out = {}
        for mono, coeff in self.terms.items():
            value = coeff * factor
            if value:
                out[mono] = value
        return WickPolynomial(out, self.backend)

    def max_abs(self) -> float:
        return max((self.backend.magnitude(coeff) for coeff in self.terms.values()), default=0.0)


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """A polynomial B localized at a site, the argument unit of retarded products."""
    poly: WickPolynomial
    site: int


@dataclass
class FieldSeries:
    """Coefficients of (-lambda)^sigma of one field at one point."""
    field_type: str
    site: int
    coefficients: Dict[int, WickPolynomial] = field(default_factory=dict)

    def __getitem__(self, order: int) -> WickPolynomial:
        return self.coefficients[order]

    @property
    def max_order(self) -> int:
        return max(self.coefficients, default=-1)
