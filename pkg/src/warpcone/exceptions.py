"""Exception hierarchy shared by all warpcone modules."""


class WarpconeError(Exception):
    """Base class for every error raised by this package."""


class SpaceMismatchError(WarpconeError, ValueError):
    """Points or objects belong to a different space than expected."""


class UndersamplingError(WarpconeError):
    """A Monte Carlo estimate saw no samples where it needed some."""


class DegenerateCloudError(WarpconeError, ValueError):
    """All the cloud mass landed in a single cell of a multi-cell net."""


class EmptyCellError(WarpconeError, ValueError):
    pass


class SizeLimitError(WarpconeError, ValueError):
    """Input too large for an exhaustive algorithm, or a run too large for memory."""


class ConvergenceError(WarpconeError, ArithmeticError):
    """An iterative solver ran out of iterations.

    The best estimate reached so far is kept on ``best_estimate``.
    """

    def __init__(self, message, best_estimate=None, residual=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.residual = residual


class ParseError(WarpconeError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RetryExhaustedError(WarpconeError, RuntimeError):
    pass


class ScaleTooSmallError(WarpconeError, ValueError):
    pass


class NetMismatchError(WarpconeError, ValueError):
    pass


class NotStochasticError(WarpconeError, ValueError):
    pass


class ConfigError(WarpconeError, ValueError):
    pass
