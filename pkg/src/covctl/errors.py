"""Exception hierarchy shared by all covctl modules.

The CLI maps each family onto a stable exit code (see ``covctl.cli``).
"""


class CovctlError(Exception):
    """Base class for every error raised by covctl."""


class DimensionError(CovctlError, ValueError):
    """Operands have incompatible shapes."""


class ModelValidationError(CovctlError, ValueError):
    """A model (or model file) violates a schema rule or invariant."""


class NumericalError(CovctlError, ArithmeticError):
    """A numerical routine failed (ill-conditioning, divergence, ...)."""


class UnstableError(NumericalError):
    """Covariance dynamics are not asymptotically stable."""

    def __init__(self, message, rho):
        super().__init__(message)
        self.rho = rho


class ConvergenceError(NumericalError):
    """Iterative solver hit its budget; carries the best incumbent found."""

    def __init__(self, message, incumbent=None, bracket=None):
        super().__init__(message)
        self.incumbent = incumbent
        self.bracket = bracket


class InfeasibleError(CovctlError):
    """The synthesis condition cannot be satisfied for this model."""
