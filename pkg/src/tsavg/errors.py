"""Exception hierarchy for time-scale calculus and averaging."""


class TimeScaleError(Exception):
    """Base class for all errors raised by :mod:`tsavg`."""


class PointNotOnScale(TimeScaleError, ValueError):
    pass


class EmptyInterval(TimeScaleError, ValueError):
    pass


class QuadratureFailure(TimeScaleError, ArithmeticError):
    pass


class KappaViolation(TimeScaleError, ValueError):
    """Raised when a derivative is requested at a left-scattered maximum."""


class NotRegressive(TimeScaleError, ArithmeticError):
    pass


class ShiftLeavesScale(TimeScaleError, ValueError):
    """The image of a shift is not a point of the time scale.

    ``iteration`` holds the zero-based index of the failing composition step
    when raised from :func:`tsavg.shifts.iterate_shift`.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class NonPositiveDerivative(TimeScaleError, ValueError):
    pass


class DegenerateFunction(TimeScaleError, ValueError):
    pass


class NotMonotone(TimeScaleError, ValueError):
    pass


class CertificateMissing(TimeScaleError, ValueError):
    pass


class ZeroLengthPeriodInterval(TimeScaleError, ValueError):
    pass


class NonPositiveParameter(TimeScaleError, ValueError):
    pass


class FieldEvaluationFailure(TimeScaleError, RuntimeError):
    pass


class NotIsolated(TimeScaleError, ValueError):
    pass


class GridMismatch(TimeScaleError, ValueError):
    pass


class EmptyHorizon(TimeScaleError, ValueError):
    pass
