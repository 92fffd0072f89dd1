"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class KPPError(Exception):
    exit_code = 1


class ConfigurationError(KPPError, ValueError):
    exit_code = 2


class DomainError(KPPError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class HorizonError(KPPError, ValueError):
    """Evaluation time outside the realized media horizon."""

    exit_code = 3


class InfeasibleError(KPPError):
    """Window, width or horizon cannot accommodate the requested run."""

    exit_code = 3


class PropertyFailure(KPPError):
    exit_code = 4


class NumericalError(KPPError, ArithmeticError):
    exit_code = 5


class IntegrationError(NumericalError):
    """Raised when a time step leaves the admissible band [0, bound]."""
