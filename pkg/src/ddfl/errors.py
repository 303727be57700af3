"""Exception hierarchy shared by all ddfl modules."""

from __future__ import annotations


class DDFLError(Exception):
    """Base class for every error raised by this package."""

    #: Sampling time of the failing run; set by :func:`ddfl.simloop.sweep`.
    sampling_time: float | None = None


class InvalidArgument(DDFLError, ValueError):
    pass


class ConfigError(InvalidArgument):
    """Experiment or CLI configuration is malformed or violates an invariant."""


class PEViolation(DDFLError):
    """Excitation data is not persistently exciting of the required order."""

    def __init__(self, message: str, rank: int | None = None, required: int | None = None):
        super().__init__(message)
        self.rank = rank
        self.required = required


class ModelEvaluationError(DDFLError):
    """Plant vector field produced a non-finite value."""


class IntegrationDiverged(DDFLError):
    """The integrator hit a non-finite state.

    ``time`` is the start of the substep that failed and ``state`` the last
    finite state reached.
    """

    def __init__(self, message: str, time: float | None = None, state=None):
        super().__init__(message)
        self.time = time
        self.state = state


class NotReady(DDFLError):
    """Estimator window is not yet full; not a numerical failure."""
