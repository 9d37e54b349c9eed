"""Exception types raised across the package."""


class ShapeError(ValueError):
    """An array argument has the wrong length or shape."""


class ValidationError(ValueError):
    """A game, network or parameter record violates its invariants."""


class IterationLimitError(RuntimeError):
    """An iterative routine hit its iteration cap before converging.

    The last residual is kept on ``residual`` so callers can decide whether
    the estimate is still usable.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class GenerationError(RuntimeError):
    """A random generator failed to produce an admissible object."""


class ParameterInfeasibleError(ValueError):
    """No step parameters satisfy the requested bound inequality."""

    def __init__(self, message, inequality=None):
        super().__init__(message)
        self.inequality = inequality


class BoundsViolationError(RuntimeError):
    """Strict mode: the step parameters fail the bound checks at some k."""

    def __init__(self, message, k=None, report=None):
        super().__init__(message)
        self.k = k
        self.report = report


class DivergenceError(RuntimeError):
    """Iterates became non-finite; carries the time index and partial trace."""

    def __init__(self, message, k=None, trace=None):
        super().__init__(message)
        self.k = k
        self.trace = trace


class UnsupportedScenarioError(ValueError):
    """The requested dynamics have no closed form for this game."""
