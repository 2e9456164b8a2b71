"""Exception hierarchy shared by every module."""


class SnnOptError(Exception):
    """Base class for all errors raised by snnopt."""


class DimensionMismatch(SnnOptError, ValueError):
    pass


class AllZeroMatrix(SnnOptError, ValueError):
    pass


class NegativeEntry(SnnOptError, ValueError):
    pass


class UnsupportedKind(SnnOptError, ValueError):
    pass


class InfeasibleDualPoint(SnnOptError, ValueError):
    pass


class InfeasiblePrimalPoint(SnnOptError, ValueError):
    pass


class CascadeDivergence(SnnOptError, RuntimeError):
    """The exhaustive spike cascade did not settle within its round cap.

    Usually means the spike strength is too small relative to the input
    drift per step (or too large relative to the threshold).
    """


class StepLimitExceeded(SnnOptError, RuntimeError):
    pass


class ZeroSteps(SnnOptError, ValueError):
    pass


class LeakyNotSupported(SnnOptError, ValueError):
    pass


class EnumerationCapExceeded(SnnOptError, RuntimeError):
    pass


class RowsNotNormalized(SnnOptError, ValueError):
    pass


class NoCellFound(SnnOptError, RuntimeError):
    pass


class MultipleCells(SnnOptError, RuntimeError):
    pass


class PointOutsidePolytope(SnnOptError, ValueError):
    pass


class IterationCapExceeded(SnnOptError, RuntimeError):
    pass


class Infeasible(SnnOptError, ValueError):
    pass


class GammaZero(SnnOptError, ValueError):
    pass


class IncompatibleTrace(SnnOptError, ValueError):
    pass
