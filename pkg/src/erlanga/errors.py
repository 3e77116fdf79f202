"""Exception hierarchy shared by all modules."""


class ErlangAError(Exception):
    """Base class for library errors."""


class ParameterError(ErlangAError, ValueError):
    """Invalid model parameters or out-of-domain arguments."""


class UnstableQueueError(ParameterError):
    """No stationary distribution exists (eta = 0 and rho >= m)."""


class PoleError(ErlangAError, ValueError):
    """Gamma function evaluated at a nonpositive integer."""


class BranchAmbiguityError(ErlangAError, ValueError):
    """A square root is evaluated on its branch cut."""


class AccuracyError(ErlangAError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    ``best`` holds the best available value and ``estimate`` the residual
    error estimate at the point of failure.
    """

    def __init__(self, message, best=None, estimate=None):
        super().__init__(message)
        self.best = best
        self.estimate = estimate


class TruncationError(AccuracyError):
    """State-space truncation lost more mass than allowed; enlarge N_max."""
