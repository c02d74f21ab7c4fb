"""Exception types shared across the package."""


class GaugeCalcError(Exception):
    """Base class for all errors raised by gaugecalc."""


class DomainError(GaugeCalcError, ValueError):
    """A point or window lies outside the domain of a function model."""


class ArgumentError(GaugeCalcError, ValueError):
    """An argument violates an operation's precondition."""


class ResourceError(GaugeCalcError, RuntimeError):
    """A depth cap or work budget was exceeded."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
