"""Exception hierarchy shared by the solver modules."""


class LmipError(Exception):
    """Base class for all errors raised by :mod:`lmip`."""


class NonFinite(LmipError, ValueError):
    """An input, residual or Jacobian contained NaN or infinity."""


class NoConverge(LmipError):
    """An iterative eigensolver exhausted its budget."""


class BudgetExhausted(LmipError):
    """An inexact projection did not meet its stopping rule in time.

    The best iterate found so far is kept on ``result`` (an
    :class:`~lmip.sets.EpsProjection`) so callers can inspect it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class RequiresLMO(LmipError):
    """The feasible set has no linear minimization oracle."""


class LineSearchFail(LmipError):
    """Backtracking ran out of trials without meeting the acceptance test."""


class ZeroResidual(LmipError):
    """The residual vanished, so the LM system is not defined (mu = 0)."""


class InvalidDims(LmipError, ValueError):
    """Problem dimensions are inconsistent."""


class InvalidConfig(LmipError, ValueError):
    """A run configuration is invalid or inconsistent."""


class MalformedTrace(LmipError, ValueError):
    """A trace file is empty or does not follow the trace format."""
