"""Exception hierarchy. CLI exit codes are keyed on these classes."""


class LiftedMFVIError(Exception):
    """Base class for all library errors."""


class EvalError(LiftedMFVIError):
    """A potential returned a non-finite value."""


class ConvergenceError(LiftedMFVIError):
    """An iterative method hit its iteration cap."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = float(residual)
        self.iterations = int(iterations)


class ParamError(LiftedMFVIError, ValueError):
    """Invalid parameters (non-SPD matrix, nonpositive constant, bad enum)."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class DomainError(LiftedMFVIError, ValueError):
    """Input outside the domain where an operation is defined."""


class ShapeError(LiftedMFVIError, ValueError):
    """Mismatched dimensions."""


class InputError(LiftedMFVIError, ValueError):
    """Empty or otherwise unusable input data."""


class AssemblyError(LiftedMFVIError):
    """Galerkin matrix failed to be positive definite."""


class MonotonicityError(DomainError):
    """A transport map lost strict monotonicity."""
