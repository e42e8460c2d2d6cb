"""Exception types raised across the package."""


class RoughACSError(Exception):
    """Base class for all package errors."""


class InvalidParameter(RoughACSError, ValueError):
    pass


class GridMismatch(RoughACSError, ValueError):
    pass


class NoConvergence(RoughACSError, RuntimeError):
    """An iteration hit its cap or stopped contracting.

    ``last`` carries the last good iterate when one exists.
    """

    def __init__(self, message, last=None, stage=None):
        super().__init__(message)
        self.last = last
        self.stage = stage


class AdmissibilityLost(NoConvergence):
    """A Newton iterate left the admissible ball ``||H - id||_{C^1} < delta``."""


class SingularFactor(RoughACSError, ArithmeticError):
    def __init__(self, message, index=None, condition=None):
        super().__init__(message)
        self.index = index
        self.condition = condition


class SingularJacobian(SingularFactor):
    pass


class GraphConditionFailed(RoughACSError, ValueError):
    pass


class TooFewBlocks(RoughACSError, ValueError):
    pass


class FormatError(RoughACSError, ValueError):
    pass
