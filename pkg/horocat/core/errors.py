"""
Exception hierarchy for horocat
Every failure raised by the core modules derives from HorocatError and
carries the process exit code the command-line front end should use.
"""


class HorocatError(Exception):
    """Base class for all horocat failures"""
    exit_code = 1

    @property
    def reason(self):
        """Machine-readable reason used in run reports"""
        return type(self).__name__


class NonSymmetric(HorocatError, ValueError):
    pass


class DimensionMismatch(HorocatError, ValueError):
    pass


class DegenerateForm(HorocatError, ValueError):
    """Raised when a hyperbolic pipeline receives a form that is not of signature (1, n)"""


class NotAnIsometry(HorocatError, ValueError):
    pass


class InvalidPoint(HorocatError, ValueError):
    pass


class DegenerateSegment(HorocatError, ValueError):
    pass


class NotLoxodromic(HorocatError):
    pass


class BudgetExceeded(HorocatError):
    """An enumeration ran past its configured element cap

    `partial` holds whatever was computed before the cap was hit.
    """
    exit_code = 3

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NotInBall(HorocatError):
    pass


class StabilizerNontrivial(HorocatError):
    pass


class NotFixed(HorocatError):
    pass


class RankDeficientCusp(HorocatError):
    def __init__(self, message, cusps=()):
        super().__init__(message)
        self.cusps = tuple(cusps)


class NoDisjointLevel(HorocatError):
    pass


class InsideHoroball(HorocatError):
    pass


class ConvergenceFailure(HorocatError):
    """The truncated geodesic solver stopped without meeting its tolerance

    `best` is the best path found, `residual` its last length improvement.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class InvalidGenerator(HorocatError, ValueError):
    pass


class ConfigError(HorocatError, ValueError):
    exit_code = 2


class NothingToPlot(HorocatError):
    pass
