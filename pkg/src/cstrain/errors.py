"""Exception hierarchy.

Every domain failure derives from :class:`CsTrainError` so callers (the CLI,
the experiment harness) can catch one type and report ``type(err).__name__``.
"""


class CsTrainError(Exception):
    """Base class for all domain errors raised by this package."""


class NonFiniteEntries(CsTrainError, ValueError):
    pass


class ShapeMismatch(CsTrainError, ValueError):
    pass


class ZeroColumn(CsTrainError, ValueError):
    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"column {self.index} has zero norm")


class ZeroMatrix(CsTrainError, ValueError):
    pass


class TooManySupports(CsTrainError):
    pass


class InvalidSpec(CsTrainError, ValueError):
    pass


class BadSparsity(CsTrainError, ValueError):
    pass


class BadShape(CsTrainError, ValueError):
    pass


class Infeasible(CsTrainError):
    pass


class MaxIters(CsTrainError):
    """Iteration cap hit; ``solution`` holds the last iterate when available."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class DegenerateConstraint(CsTrainError):
    pass


class TooLarge(CsTrainError, ValueError):
    pass


class AllDegenerate(CsTrainError):
    pass


class NoCandidates(CsTrainError):
    pass


class FactorizationFailed(CsTrainError):
    pass


class NotEnoughEasy(CsTrainError):
    pass


class AllFailed(CsTrainError):
    pass


class InfeasibleKnobs(CsTrainError, ValueError):
    pass


class IoError(CsTrainError, OSError):
    pass
