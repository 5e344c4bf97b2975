"""Exception types shared across the package."""


class ModelError(ValueError):
    """A law or kernel produced an invalid value (negative or non-finite rate, bad fragments)."""


class UsageError(ValueError):
    """Invalid arguments supplied by the caller (bad index, malformed config)."""


class CapabilityError(TypeError):
    """The requested operation is not supported by this object."""


class DomainError(ValueError):
    """Argument outside the domain where a closed form is defined."""


class StepSizeError(ArithmeticError):
    """Fixed-step ODE integration went negative beyond tolerance."""


class DivergenceError(ArithmeticError):
    """A series whose value was requested diverges."""
