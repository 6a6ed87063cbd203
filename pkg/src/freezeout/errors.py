"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid shapes, schedule parameters, or configuration keys."""


class NumericalError(ArithmeticError):
    """A NaN or Inf showed up in an activation or the loss."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class UndefinedSpeedupError(ZeroDivisionError):
    """Raised when the baseline cost is zero and a speedup ratio is meaningless."""
