"""Exception types shared across the package."""


class DivergenceError(RuntimeError):
    """An optimizer produced a non-finite objective or gradient.

    Carries the partial training trace so callers can inspect how far the
    run got before blowing up.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NoViableStepError(RuntimeError):
    """Every candidate step size in a grid search diverged."""
