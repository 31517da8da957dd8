"""Exception hierarchy.

Validation problems (bad input) derive from :class:`ValidationError`, which is
a ``ValueError``.  Numerical failures derive from :class:`NumericalError`.
The CLI maps the two families onto distinct exit codes.
"""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class CatalogError(ValidationError):
    """Malformed or invalid signature catalog / scenario document.

    ``location`` is a human readable pointer such as ``"line 7, signatures[1].params"``.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class InfeasibleSetError(ValidationError):
    """A feasible schedule box is empty once the horizon cap is applied."""


class NumericalError(ArithmeticError):
    """A numerical routine could not deliver a result."""


class QuadratureError(NumericalError):
    def __init__(self, message, achieved):
        self.achieved = achieved
        super().__init__(f"{message} (achieved tolerance {achieved:.3g})")


class GradientUnavailableError(NumericalError):
    """Correlation matrix is singular or too ill-conditioned to differentiate the bound."""

    def __init__(self, message, condition=float("inf")):
        self.condition = condition
        super().__init__(message)


class OptimizationError(NumericalError):
    """No multistart run produced a usable objective value."""
