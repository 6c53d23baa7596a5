"""Shared exception and warning types."""


class GammaCalcError(Exception):
    """Base class for all library errors."""


class SingularPointError(GammaCalcError):
    """Raised when a derivative is requested at a point where it is infinite."""


class InadmissibleStepError(GammaCalcError):
    """Raised when a step/time parameter violates its admissibility bound."""


class DomainError(GammaCalcError):
    """Raised when an evaluation node falls outside a function's domain."""


class ApproximationError(GammaCalcError):
    """Raised when a best-approximation subproblem cannot be solved."""


class PartitionSizeError(GammaCalcError):
    """Raised when a covering partition would exceed the configured cell budget."""


class BreakpointWarning(UserWarning):
    """Emitted when a quantity is evaluated exactly at the linear-branch joint,
    where one-sided values of higher derivatives may differ."""


class QuadratureWarning(UserWarning):
    """Emitted when adaptive quadrature stops before reaching its tolerance."""
