"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A parameter violates its documented domain (e.g. a non-positive scale)."""


class NotDifferentiableError(TypeError):
    """Requested a derivative of a kernel that is not twice differentiable."""


class NumericError(ArithmeticError):
    """A numerical operation failed (singular system, non-finite values, ...)."""


class NoStationaryDistributionError(RuntimeError):
    """The continuous-time block is not strictly stable, so no stationary
    covariance exists."""


class ContractViolationError(RuntimeError):
    """A caller broke an interface contract (e.g. a changepoint strictly inside
    a discretization step)."""
