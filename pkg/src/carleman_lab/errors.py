"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input; the message names the failed check or config field."""


class CoverFailureError(RuntimeError):
    """A frequency point fell in neither microlocal cone (bug signal)."""


class ZoneAssignmentError(RuntimeError):
    """No convexification zone matched a frequency point (bug signal)."""


class NonConvergenceError(RuntimeError):
    """A numeric procedure failed its convergence or self-consistency test."""
