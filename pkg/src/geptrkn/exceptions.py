"""Exception hierarchy for the geptrkn package."""


class GeptrknError(Exception):
    """Base class for every error raised by this package."""


class NonDistinctNodes(GeptrknError, ValueError):
    pass


class IllConditioned(GeptrknError, ArithmeticError):
    """A coefficient solve left a residual too large to trust the node set."""


class NonPositiveRatio(GeptrknError, ValueError):
    pass


class RatioOutOfRange(GeptrknError, ValueError):
    pass


class OutOfRangeXi(GeptrknError, ValueError):
    pass


class NonFiniteState(GeptrknError, FloatingPointError):
    """Integration produced inf/nan (usually a step outside the stability region)."""


class DimensionMismatch(GeptrknError, ValueError):
    pass


class GridMismatch(GeptrknError, ValueError):
    pass


class MaxRejections(GeptrknError, RuntimeError):
    pass


class OracleFailure(GeptrknError, RuntimeError):
    pass


class ToleranceUnreachable(GeptrknError, RuntimeError):
    pass


class NoConvergence(GeptrknError, ArithmeticError):
    pass


class MissingExactSolution(GeptrknError, ValueError):
    pass


class UnknownMethod(GeptrknError, KeyError):
    def __str__(self):
        # KeyError.__str__ would repr() the message
        return str(self.args[0]) if self.args else ""


class UnknownProblem(GeptrknError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""
