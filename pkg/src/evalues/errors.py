"""Exception types shared across the package.

Every error is a subclass of a builtin so callers that already catch
``ValueError`` or ``ArithmeticError`` keep working.
"""


class DomainError(ValueError):
    """A parameter lies outside the domain where the operation is defined."""


class EmptyInputError(ValueError):
    """An operation received an empty sequence where at least one item is needed."""


class InfeasibleError(ArithmeticError):
    """No admissible value exists, e.g. a root-finding problem has no root."""


class DegenerateSampleError(ArithmeticError):
    """The sample makes a statistic undefined (zero denominator and the like)."""


class NoFeasibleDecisionError(InfeasibleError):
    """Even the safest decision breaches the loss budget."""
