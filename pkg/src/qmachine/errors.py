"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class SymmetryError(DomainError):
    """Detection probability differs between a state and its antipode."""


class ConfigError(ValueError):
    """A simulation or CLI configuration is invalid."""


class QuadratureError(ArithmeticError):
    """Numerical integration did not reach the requested accuracy."""

    def __init__(self, message, *, estimate=None, abserr=None, info=None):
        super().__init__(message)
        self.estimate = estimate
        self.abserr = abserr
        self.info = info
