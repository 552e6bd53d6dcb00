"""Exception hierarchy shared by all solver components."""


class MelpathError(Exception):
    """Base class for every error raised by this package."""


class InputError(MelpathError, ValueError):
    """Malformed or inconsistent user input (shapes, ranges, unknown keys)."""


class DomainError(MelpathError, ValueError):
    """A transform was evaluated outside its domain, e.g. sqrt near zero."""


class DivergenceError(MelpathError):
    """Integration produced a non-finite state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ShootingError(MelpathError):
    """Shooting did not meet the endpoint tolerance within ``max_iter``."""

    def __init__(self, message, best_residual=float("nan"), best_v0=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_v0 = best_v0


class OptimizationError(MelpathError):
    """The outer search over the memory constant found no usable point."""


class ConvergenceError(MelpathError):
    """A fixed-point iteration ran out of iterations."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class StallError(MelpathError):
    """Backtracking line search could not find an ascent step."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


class BracketError(MelpathError):
    """No sign change of the residual inside the search bracket."""
