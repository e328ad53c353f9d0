"""Exception types shared across the package."""


class QHahnError(Exception):
    """Base class for errors raised by this package."""


class SingularityError(QHahnError, ArithmeticError):
    """A denominator factor vanishes."""


class PoleError(SingularityError):
    """A lower parameter (or prefactor) hits a pole."""


class DivergenceError(QHahnError, ArithmeticError):
    """A series or product does not converge."""


class DomainError(QHahnError, ValueError):
    """An argument lies outside the supported domain."""


class ParameterError(QHahnError, ValueError):
    """Model parameters outside their admissible range."""


class TruncationError(QHahnError, ArithmeticError):
    """A tail bound could not be brought below the requested tolerance."""


class TieError(QHahnError, ArithmeticError):
    """Two competing values of the beta recursion coincide."""


class ContourError(QHahnError, ValueError):
    """No admissible nested contour family exists."""
