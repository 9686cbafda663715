"""Exception hierarchy.

``ConfigError`` signals bad user input to the experiment runner (CLI exit
code 2); every other ``SpectralCLTError`` is a numerical or domain failure
(CLI exit code 3).
"""


class SpectralCLTError(Exception):
    """Base class for all package errors."""


class ConfigError(SpectralCLTError, ValueError):
    pass


class DomainError(SpectralCLTError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalError(SpectralCLTError, ArithmeticError):
    """A computation could not produce a trustworthy result."""


# model
class NotPSDError(DomainError):
    pass


class RankDeficientError(DomainError):
    pass


# linalg
class NotSymmetricError(DomainError):
    pass


class TooLargeError(DomainError):
    pass


class RankDeficientCrossError(DomainError):
    pass


class NoConvergenceError(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DegenerateStartError(NumericalError):
    pass


# embed
class DegenerateSpectrumError(NumericalError):
    pass


# clt
class NonPositiveVarianceError(DomainError):
    pass


class SingularDeltaError(DomainError):
    pass


class SingularSigmaError(DomainError):
    pass


class EmptyBlockError(DomainError):
    pass


class TooFewReplicatesError(DomainError):
    pass


class BadDimensionError(DomainError):
    pass


# cluster
class DegeneratePointsError(DomainError):
    pass


class TooManyClassesError(DomainError):
    pass
