"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InfeasibleError(ValueError):
    """A constraint set is empty for the requested threshold."""


class CapacityError(RuntimeError):
    """A computation would exceed its configured size budget."""

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class TailUnderflowError(ArithmeticError):
    """A tail probability is zero, so its logarithm is undefined."""


class IndeterminateFormError(ArithmeticError):
    """Extended-real arithmetic produced 0 * inf."""


class ConfigError(ValueError):
    """An experiment configuration is invalid."""
