"""Exception hierarchy.

Errors split into two families so the CLI can map them to exit codes:
``InputError`` for bad user input, ``NumericalError`` for solver or
quadrature breakdowns.
"""

from __future__ import annotations


class RMTError(Exception):
    """Base class for all library errors."""


class InputError(RMTError, ValueError):
    """Malformed or out-of-contract input."""


class NumericalError(RMTError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy value."""


class NonConvergence(NumericalError):
    """Iteration budget exhausted before reaching tolerance."""

    def __init__(self, message: str, residual: float = float("nan"), guard: str = "") -> None:
        super().__init__(message)
        self.residual = residual
        self.guard = guard


class EdgeDetectionFailure(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class SingularPencil(NumericalError):
    pass


class NearSingularStability(NumericalError):
    pass


class PoleHit(NumericalError):
    pass


class DenominatorNearZero(NumericalError):
    pass


class DegenerateSpectrum(InputError):
    pass


class NonSPD(InputError):
    pass


class NonInvertible(InputError):
    pass
