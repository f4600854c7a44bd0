class SketchError(Exception):
    """Base class for errors raised by freesketch."""


class InvalidArgument(SketchError, ValueError):
    pass


class UnsupportedSize(SketchError, ValueError):
    """A size parameter falls outside the range an evaluator or constant table covers."""


class OutOfRegime(SketchError, ValueError):
    """An approximation was requested outside the parameter range where it holds."""


class SaturationError(SketchError, ArithmeticError):
    """A bitmap estimator hit zero free positions, where the log estimator is undefined.

    ``bound`` carries the largest value the estimator can report (``m ln m``).
    """

    def __init__(self, message: str, bound: float):
        super().__init__(message)
        self.bound = bound
