"""Exception hierarchy. The CLI maps ``ValidationError`` to exit code 2 and
``NumericalError`` to exit code 3."""


class RoverNavError(Exception):
    pass


class ValidationError(RoverNavError, ValueError):
    pass


class NumericalError(RoverNavError, ArithmeticError):
    pass


# geodesy
class GimbalLock(NumericalError):
    pass


class RangeExceeded(ValidationError):
    pass


# mechanization
class InvalidDt(ValidationError):
    pass


class PolarSingularity(NumericalError):
    pass


# ekf
class NonPositiveDefinite(NumericalError):
    pass


class SingularInnovationCovariance(NumericalError):
    pass


class LargeAttitudeError(NumericalError):
    pass


# aiding
class InsufficientWindow(ValidationError):
    pass


class IncompleteWindow(ValidationError):
    pass


class SingularCovariance(NumericalError):
    pass


class WheelStopped(ValidationError):
    pass


# smoother
class SingularPredictedCovariance(NumericalError):
    pass


class BufferOverflow(RoverNavError):
    pass


# sim
class InfeasiblePath(ValidationError):
    pass


# pipeline
class TimestampRegression(ValidationError):
    pass


class ConfigMismatch(ValidationError):
    pass


class NoOverlap(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class NonMonotoneTime(ValidationError):
    pass
