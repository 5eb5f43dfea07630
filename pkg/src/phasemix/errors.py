"""Exception hierarchy shared by all phasemix modules."""


class PhasemixError(Exception):
    """Base class for every error raised by phasemix."""


class ShapeError(PhasemixError, ValueError):
    """Non-square input, mismatched dimensions or non-finite entries."""


class SingularMatrixError(PhasemixError, ArithmeticError):
    """A matrix is singular to working tolerance.

    For a phase generator this means absorption is not certain.
    """


class UnsupportedSpectrumError(PhasemixError):
    """Repeated or complex eigenvalues where a real simple spectrum is required."""


class ConvergenceError(PhasemixError, ArithmeticError):
    """An iterative kernel failed to converge."""


class ModelValidationError(PhasemixError, ValueError):
    """A model or closed-set family violates an admissibility invariant."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class StructureMismatchError(PhasemixError, ValueError):
    """Generators do not have the block pattern required by the structured formulas."""


class ImpossibleObservationError(PhasemixError):
    """The conditioning history has zero probability under every regime."""


class InfeasibleConditioningError(PhasemixError):
    """Rejection sampling accepted too few paths to condition on a scenario."""
