"""Exception hierarchy shared by all rimkit modules."""


class RimError(Exception):
    """Base class for every error raised by rimkit."""


class ParameterError(RimError, ValueError):
    pass


class AlignmentError(RimError, ValueError):
    """A time is not a multiple of the underlying grid step."""


class WindowError(RimError, IndexError):
    """A requested time falls outside the stored noise window."""


class DomainError(RimError, ValueError):
    pass


class SpectralCollisionError(RimError, ValueError):
    """The splitting reference value coincides with an eigenvalue."""


class PreconditionError(RimError, ValueError):
    pass


class ConvergenceError(RimError, RuntimeError):
    """Fixed-point iteration hit its iteration cap.

    The observed contraction estimate is kept on ``contraction_est``.
    """

    def __init__(self, message, contraction_est=float("nan"), last_delta=float("nan")):
        super().__init__(message)
        self.contraction_est = contraction_est
        self.last_delta = last_delta
