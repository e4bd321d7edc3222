"""Exception hierarchy shared by all qfluid modules."""


class QFluidError(Exception):
    """Base class for every error raised by qfluid."""


# physics
class NonPositiveDensity(QFluidError, ValueError):
    pass


class GammaOne(QFluidError, ValueError):
    pass


class DimensionMismatch(QFluidError, ValueError):
    pass


class UnresolvedField(QFluidError, ValueError):
    pass


# discretization
class BadResolution(QFluidError, ValueError):
    pass


class DomainMismatch(QFluidError, ValueError):
    pass


class TooManyModes(QFluidError, ValueError):
    pass


# solver
class SolverError(QFluidError, RuntimeError):
    """Failure of a time step; ``time`` is the solver clock when it happened."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class PositivityLost(SolverError):
    pass


class CFLViolation(SolverError):
    pass


class FixedPointDiverged(SolverError):
    pass


class BoundViolated(QFluidError, AssertionError):
    def __init__(self, message, index=None, time=None):
        super().__init__(message)
        self.index = index
        self.time = time


# energy / relative energy
class AuditFailed(QFluidError, AssertionError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class UnsupportedKind(QFluidError, ValueError):
    pass


class WindowEmpty(QFluidError, ValueError):
    pass


# trajectories
class GridUncovered(QFluidError, ValueError):
    pass


class HorizonExceeded(QFluidError, ValueError):
    pass


class SeamMismatch(QFluidError, ValueError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class EmptyCandidates(QFluidError, ValueError):
    pass


class MixedInitialData(QFluidError, ValueError):
    pass


# configuration
class ParseError(QFluidError, ValueError):
    pass


class ValidationError(QFluidError, ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
