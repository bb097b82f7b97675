"""Exception types shared across the package.

Plain ValueError is used for invalid arguments; the classes here mark failure
modes a caller may want to catch and handle per grid point (a sweep records
them in a status column and keeps going).
"""


class ResourceLimitError(RuntimeError):
    """Problem size exceeds a configured limit (message names the limit)."""


class BracketFailureError(RuntimeError):
    """Target energy not bracketed by the search interval after expansion."""


class DataQualityError(RuntimeError):
    """Inputs are inconsistent beyond their stated statistical errors."""


class CrossingNotFoundError(RuntimeError):
    """No sign change found in the scanned range (diagnostics attached)."""

    def __init__(self, message, scan=None):
        super().__init__(message)
        self.scan = scan


class FitFailureError(RuntimeError):
    """Nonlinear fit did not converge; carries the iteration trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DiagnosticsError(RuntimeError):
    """A Monte Carlo run left its validity envelope (e.g. cutoff blow-up)."""
