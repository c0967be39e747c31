"""Exception types raised across the package."""


class PrandtlLabError(Exception):
    """Base class for all package errors."""


class NonConvergence(PrandtlLabError):
    pass


class NonPositiveVelocity(PrandtlLabError):
    pass


class GridMismatch(PrandtlLabError):
    pass


class DegenerateDenominator(PrandtlLabError):
    pass


class AmplitudeTooLarge(PrandtlLabError):
    pass


class QuadratureDivergence(PrandtlLabError):
    pass


class LinearSolveFailure(PrandtlLabError):
    pass


class MaximumPrincipleViolation(PrandtlLabError):
    pass


class OutOfDomain(PrandtlLabError):
    pass


class ShiftSingular(PrandtlLabError):
    pass


class InsufficientHistory(PrandtlLabError):
    pass


class NonPositiveValue(PrandtlLabError):
    pass


class OrderingViolation(PrandtlLabError):
    def __init__(self, message, station=None, node=None):
        super().__init__(message)
        self.station = station
        self.node = node


class SandwichSearchFailed(PrandtlLabError):
    pass


class ConfigError(PrandtlLabError):
    pass
