"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`TrimwaveError`; most also derive from the builtin that a caller
would naturally catch (``ValueError``, ``IndexError``, ...).
"""


class TrimwaveError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(TrimwaveError, ValueError):
    pass


class SizeCapError(TrimwaveError, ValueError):
    pass


class InvalidTrimError(TrimwaveError, ValueError):
    pass


class InvalidRestrictionError(TrimwaveError, ValueError):
    pass


class ConfigurationError(TrimwaveError, ValueError):
    pass


class NotSeparableError(TrimwaveError, ValueError):
    pass


class RealizationRangeError(TrimwaveError, IndexError):
    pass


class InvalidShiftError(TrimwaveError, ValueError):
    pass


class InvalidModeError(TrimwaveError, ValueError):
    pass


class UnsupportedClosedFormError(TrimwaveError, ValueError):
    pass


class InvalidIntervalError(TrimwaveError, ValueError):
    pass


class EmptySetError(TrimwaveError, ValueError):
    pass


class DegeneracyError(TrimwaveError, ArithmeticError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class AdmissibilityError(TrimwaveError, ValueError):
    pass


class ParityError(TrimwaveError, ValueError):
    pass


class SupportViolationError(TrimwaveError, ValueError):
    pass


class ParameterError(TrimwaveError, ValueError):
    pass


class SingularityError(TrimwaveError, ArithmeticError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FitRangeError(TrimwaveError, ValueError):
    pass


class PreconditionError(TrimwaveError, ValueError):
    pass
