"""Exception hierarchy for the solver suite.

Every error raised by this package derives from :class:`GtrsError`.  The
pipeline driver attaches the name of the stage that failed to the ``stage``
attribute before letting an error propagate, so callers (and the CLI) can
report where a solve broke down.
"""

from __future__ import annotations


class GtrsError(Exception):
    """Base class for all errors raised by this package."""

    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__(message)
        self.stage = stage


class ValidationError(GtrsError):
    """Malformed or inconsistent problem data."""


class UnboundedError(GtrsError):
    """The problem is unbounded from below."""


class UnsupportedProblemError(GtrsError):
    """Well-posed but outside the supported problem classes.

    Raised for pencils whose semidefinite set degenerates to a single
    point; solving those requires machinery this suite does not provide.
    """


class IterativeFailureError(GtrsError):
    """An iterative kernel (CG, eigensolver) did not reach its tolerance.

    Carries the best iterate and its residual so callers can decide
    whether the partial result is still usable.
    """

    def __init__(self, message: str, *, best=None, residual: float | None = None,
                 stage: str | None = None):
        super().__init__(message, stage=stage)
        self.best = best
        self.residual = residual


class StalledLineSearchError(GtrsError):
    """Backtracking line search exhausted its trial budget."""

    def __init__(self, message: str, *, trials: int | None = None,
                 step: float | None = None, stage: str | None = None):
        super().__init__(message, stage=stage)
        self.trials = trials
        self.step = step


class NumericalError(GtrsError):
    """A numerical inconsistency that indicates loss of precision."""
