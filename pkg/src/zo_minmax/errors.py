"""Exception types shared across the package."""


class ZoMinmaxError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgumentError(ZoMinmaxError, ValueError):
    pass


class UnsupportedModeError(ZoMinmaxError):
    """Raised when an operation needs information the oracle does not expose."""


class NumericalFailureError(ZoMinmaxError, ArithmeticError):
    """A loss or gradient evaluation produced NaN/Inf."""

    def __init__(self, message: str, epoch: int | None = None, index: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.index = index


class NonConvergenceError(ZoMinmaxError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class DataLoadError(ZoMinmaxError):
    pass
