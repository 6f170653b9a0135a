"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class NumericalError(ArithmeticError):
    """Raised when a computation produces a non-finite or unphysical result."""
