"""Exception hierarchy shared by the solvers, simulators and the CLI."""


class GeofwdError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(GeofwdError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class ConfigError(GeofwdError, ValueError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2


class NumericalError(GeofwdError, ArithmeticError):
    """A numerical routine produced an out-of-tolerance result."""

    exit_code = 3


class ToleranceError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class SimulationError(GeofwdError, RuntimeError):
    """The network simulator could not complete a run."""

    exit_code = 4


class RoutingError(SimulationError):
    pass


class RetryExhaustedError(SimulationError):
    pass
