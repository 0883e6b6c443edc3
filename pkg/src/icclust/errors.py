"""Exception hierarchy mapped onto the CLI exit codes."""


class IccError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(IccError):
    """Invalid configuration: bad flag values, out-of-range parameters (exit 2)."""


class DataError(IccError):
    """Input data violates a precondition: parse failures, shape or sign
    violations, degenerate inputs (exit 3)."""


class NumericalError(IccError):
    """A numerical routine broke down or failed to converge (exit 4)."""
