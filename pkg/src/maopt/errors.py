"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and every NumericError subclass to
exit code 3; validation failures are reported through return values, not
exceptions.
"""


class ConfigError(ValueError):
    """Bad configuration file, flag combination, or input schema."""


class InvalidInputError(ValueError):
    """Arguments violate a documented precondition (shape/range mismatch)."""


class UnsupportedConfigError(InvalidInputError):
    """Configuration outside the supported regime (e.g. more users than antennas)."""


class NumericError(RuntimeError):
    """Base class for runtime numerical failures."""


class SingularChannelError(NumericError):
    """Channel Gram matrix is numerically singular (users linearly dependent)."""


class DegenerateScenarioError(NumericError):
    """Scenario statistics make the requested operation meaningless."""


class ConvergenceError(NumericError):
    """An iterative solver exhausted its iteration budget."""


class InfeasiblePointError(NumericError):
    """A layout violates the moving-region or spacing constraints."""
