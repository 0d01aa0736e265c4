"""Exception types shared across the package."""


class InputError(ValueError):
    """Caller-supplied data violated a documented precondition."""


class UndefinedCorrelationError(InputError):
    """Rank correlation is undefined (a variable has all-tied values)."""
