"""Exception types raised across the package."""


class LoopSoupError(Exception):
    """Base class for all package errors."""


class InvalidArgument(LoopSoupError, ValueError):
    pass


class SizeLimitError(LoopSoupError, ValueError):
    """A combinatorial enumeration would exceed the configured guard."""


class DegenerateLoopError(LoopSoupError):
    """The path is too small to be resolved at the requested resolution."""


class BoundaryAmbiguityError(LoopSoupError):
    """A query point sits within one grid cell of a loop boundary."""


class IncompleteTableError(LoopSoupError, KeyError):
    pass


class CalibrationError(LoopSoupError):
    pass


class BranchCutError(LoopSoupError, ValueError):
    """Argument lies on the cut [1, inf) of the hypergeometric function."""


class ConvergenceError(LoopSoupError):
    pass


class ConsistencyError(LoopSoupError):
    """An internal cross-check failed (e.g. a real quantity came out complex)."""


class DegenerateModuleError(LoopSoupError):
    """A Gram matrix is singular at some level."""

    def __init__(self, level: int, message: str = ""):
        self.level = level
        super().__init__(message or f"singular Gram matrix at level {level}")


class IllConditionedError(LoopSoupError):
    def __init__(self, site, message: str = ""):
        self.site = site
        super().__init__(message or f"ill-conditioned solve at lattice site {site}")
