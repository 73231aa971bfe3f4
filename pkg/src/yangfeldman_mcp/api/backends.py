"""
Number backends for propagator tables and Wick coefficients.

The float backend works with numpy float arrays and Python complex
coefficients. The exact backend keeps every real quantity in sympy's rational
field QQ and every coefficient in the Gaussian rationals QQ_I, so operator
identities can be checked to an exact zero.
"""

from fractions import Fraction
from typing import Any, Iterable

import numpy as np
from sympy.polys.domains import QQ, QQ_I

from .errors import ConfigError

MAX_DENOMINATOR = 10**6


class NumberBackend:
    """Common interface of the float and exact backends."""

    name = "abstract"
    exact = False

    def real(self, value: float) -> Any:
        raise NotImplementedError

    def real_array(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zeros(self, shape) -> np.ndarray:
        raise NotImplementedError

    def coefficient(self, value: Any) -> Any:
        """Lift a backend real to a coefficient."""
        raise NotImplementedError

    def i_times(self, value: Any) -> Any:
        """Coefficient i * value for a backend real."""
        raise NotImplementedError

    def to_complex(self, coeff: Any) -> complex:
        raise NotImplementedError

    def to_float_array(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def zero(self) -> Any:
        raise NotImplementedError

    @property
    def one(self) -> Any:
        raise NotImplementedError

    @property
    def imag_unit(self) -> Any:
        raise NotImplementedError

    def magnitude(self, coeff: Any) -> float:
        return abs(self.to_complex(coeff))

    def conjugate(self, coeff: Any) -> Any:
        raise NotImplementedError

    def total(self, values: Iterable[Any]) -> Any:
        acc = self.zero
        for value in values:
            acc = acc + value
        return acc


class FloatBackend(NumberBackend):
    name = "float"
    exact = False

    def real(self, value: float) -> float:
        return float(value)

    def real_array(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float)

    def zeros(self, shape) -> np.ndarray:
        return np.zeros(shape, dtype=float)

    def coefficient(self, value: Any) -> complex:
        return complex(value)

    def i_times(self, value: Any) -> complex:
        return 1j * float(value)

    def to_complex(self, coeff: Any) -> complex:
        return complex(coeff)

    def to_float_array(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float)

    @property
    def zero(self) -> complex:
        return 0j

    @property
    def one(self) -> complex:
        return 1 + 0j

    @property
    def imag_unit(self) -> complex:
        return 1j

    def conjugate(self, coeff: Any) -> complex:
        return complex(coeff).conjugate()


class ExactBackend(NumberBackend):
    name = "exact"
    exact = True

    def real(self, value: Any) -> Any:
        if isinstance(value, int):
            return QQ(value)
        if QQ.of_type(value):
            return value
        frac = Fraction(repr(float(value))).limit_denominator(MAX_DENOMINATOR)
        return QQ(frac.numerator, frac.denominator)

    def real_array(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        out = np.empty(values.shape, dtype=object)
        for index, value in np.ndenumerate(values):
            out[index] = self.real(value)
        return out

    def zeros(self, shape) -> np.ndarray:
        out = np.empty(shape, dtype=object)
        out.fill(QQ(0))
        return out

    def coefficient(self, value: Any) -> Any:
        if isinstance(value, complex):
            return QQ_I(self.real(value.real), self.real(value.imag))
        return QQ_I(self.real(value), QQ(0))

    def i_times(self, value: Any) -> Any:
        return QQ_I(QQ(0), self.real(value))

    def to_complex(self, coeff: Any) -> complex:
        if QQ.of_type(coeff) or isinstance(coeff, int):
            return complex(float(coeff), 0.0)
        return complex(float(coeff.x), float(coeff.y))

    def to_float_array(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        out = np.empty(values.shape, dtype=float)
        for index, value in np.ndenumerate(values):
            out[index] = float(value)
        return out

    @property
    def zero(self) -> Any:
        return QQ_I.zero

    @property
    def one(self) -> Any:
        return QQ_I.one

    @property
    def imag_unit(self) -> Any:
        return QQ_I(QQ(0), QQ(1))

    def conjugate(self, coeff: Any) -> Any:
        return QQ_I(coeff.x, -coeff.y)


FLOAT = FloatBackend()
EXACT = ExactBackend()


def get_backend(name: str) -> NumberBackend:
    """
    Look up a backend by name.

    Args:
        name: One of "float" or "exact".

    Returns:
        The backend singleton.

    Raises:
        ConfigError: If the name is unknown.
    """
    if isinstance(name, NumberBackend):
        return name
    key = str(name).lower()
    if key == "float":
        return FLOAT
    if key == "exact":
        return EXACT
    raise ConfigError(f"Unknown backend '{name}'. Available backends: exact, float")
