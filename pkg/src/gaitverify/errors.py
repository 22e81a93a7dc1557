"""Exception types shared by every gaitverify module."""


class GaitVerifyError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(GaitVerifyError, ValueError):
    """An argument violates a documented precondition."""


class InvalidStateError(GaitVerifyError, RuntimeError):
    """An object is not in the state required by the operation."""


class ConvergenceError(GaitVerifyError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    Carries the final KKT residual so callers can report how far the
    solver got.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FormatError(GaitVerifyError, ValueError):
    """A file does not match its declared on-disk format."""
