"""Exception types raised across the package."""


class UsageError(ValueError):
    """Caller passed arguments that violate an operation's preconditions."""


class DomainError(ValueError):
    """A parameter lies outside the range where the model is defined."""


class DegenerateLawError(ValueError):
    """A step law (or a truncation of one) has zero variance."""


class HorizonError(ValueError):
    """A simulated path is too short for the requested evaluation.

    ``required_horizon`` carries a suggested horizon when one can be estimated.
    """

    def __init__(self, message, required_horizon=None):
        super().__init__(message)
        self.required_horizon = required_horizon


class NumericalError(RuntimeError):
    """A numerical routine failed (e.g. a Cholesky factorization)."""
