"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A constructor or operation received parameters outside its documented range."""


class NumericalInstabilityError(RuntimeError):
    """Time stepping diverged (norm growth beyond the safety factor)."""

    def __init__(self, message: str, dt: float | None = None):
        super().__init__(message)
        self.dt = dt


class ConvergenceError(RuntimeError):
    """Iterative mode search failed to converge; carries the efficiency history."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class ClockRangeError(RuntimeError):
    """The retrieval profile was truncated too early; increase u_max."""


class InfeasibleTargetError(RuntimeError):
    """Target demands output where the retrieval profile vanishes."""
