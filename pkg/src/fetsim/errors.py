"""Semantic exception hierarchy shared by all fetsim modules."""


class FetsimError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FetsimError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(FetsimError, ValueError):
    """A configuration or size limit was violated (caller error, not math)."""


class StructuralError(FetsimError, RuntimeError):
    """An internal consistency check failed (bad kernel row, non-absorbing
    chain, unreachable states).  Carries enough context to locate the issue."""


class PlantingError(FetsimError, RuntimeError):
    """A planted grid point failed classifier re-validation, typically
    because the target domain is empty at the chosen (n, delta)."""
