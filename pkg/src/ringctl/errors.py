"""Exception types shared across the package.

The CLI maps these onto exit codes: invalid input / capacity problems
exit with 2, numerical failures with 3.
"""


class RingctlError(Exception):
    """Base class for all package-specific errors."""


class DomainError(RingctlError, ValueError):
    """An argument is outside the documented domain of an operation."""


class CapacityError(RingctlError, ValueError):
    """A requested system size exceeds the supported desk-scale caps."""


class KrylovError(RingctlError, RuntimeError):
    """Krylov matrix-exponential iteration failed to converge."""


class IntegrationError(RingctlError, RuntimeError):
    """Adaptive ODE integration exhausted its step budget."""

    def __init__(self, message: str, t_reached: float | None = None):
        super().__init__(message)
        self.t_reached = t_reached
