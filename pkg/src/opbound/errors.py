"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Argument outside the documented domain of an operation."""


class DomainViolationError(ValueError):
    """Evaluation point leaves [0, 1]."""


class CapabilityError(RuntimeError):
    """The requested quantity needs a capability the object lacks (e.g. a derivative)."""


class DivergenceError(ArithmeticError):
    """Iterates of an operator do not converge (spectrum touches the unit circle away from 1)."""


class PreconditionError(RuntimeError):
    """A hypothesis of a certified inequality is not met."""
