"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class UwcapError(Exception):
    exit_code = 1


class DomainError(UwcapError, ValueError):
    """An argument lies outside the domain of a channel law."""

    exit_code = 3


class ConfigError(UwcapError, ValueError):
    """Invalid configuration: bad key, type or constraint violation."""

    exit_code = 3


class UsageError(UwcapError, ValueError):
    """An operation was applied to an object it does not accept."""

    exit_code = 2


class RegimeError(UwcapError, ValueError):
    """The absorption regime does not support the requested bound."""

    exit_code = 3


class ResourceError(UwcapError, MemoryError):
    exit_code = 4


class NumericalError(UwcapError, ArithmeticError):
    """An iterative method failed to converge."""

    exit_code = 5


class RoutingError(UwcapError, RuntimeError):
    exit_code = 5


class CheckFailure(UwcapError, AssertionError):
    """A verification check did not hold."""

    exit_code = 1
