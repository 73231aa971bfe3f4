"""
Exception types raised by the engine.
"""


class YangFeldmanError(Exception):
    """Base class for all engine errors."""


class ConfigError(YangFeldmanError, ValueError):
    """Raised for malformed or unknown configuration values."""


class LatticeConfigError(ConfigError):
    """Raised when lattice parameters violate the stepper invariants."""


class BudgetExceededError(YangFeldmanError, ValueError):
    """Raised when a perturbative order exceeds the configured budget."""


class DegreeCapError(YangFeldmanError, ValueError):
    """Raised when functionals of different degree caps are combined."""


class DomainError(YangFeldmanError, ValueError):
    """Raised when a star power series is applied outside its domain."""


class CompatibilityError(YangFeldmanError, ValueError):
    """Raised when two Wightman functionals do not share the same CCR."""


class ModeBasisError(YangFeldmanError, RuntimeError):
    """Raised when the mode basis is inconsistent with the commutator function."""


class ReconstructionError(YangFeldmanError, RuntimeError):
    """Raised when particle amplitudes cannot be recovered."""
