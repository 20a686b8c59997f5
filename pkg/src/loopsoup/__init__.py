"""Brownian loop soup correlators: loop-measure Monte Carlo, exact CFT
expressions, Virasoro block decompositions and a percolation arm check."""
from .errors import (BoundaryAmbiguityError, BranchCutError, CalibrationError,
                     ConsistencyError, ConvergenceError, DegenerateLoopError,
                     DegenerateModuleError, IllConditionedError, IncompleteTableError,
                     InvalidArgument, LoopSoupError, SizeLimitError)
from .stats import CorrelationEstimate

__version__ = "0.1.0"

__all__ = [
    "LoopSoupError", "InvalidArgument", "SizeLimitError", "DegenerateLoopError",
    "BoundaryAmbiguityError", "IncompleteTableError", "CalibrationError", "BranchCutError",
    "ConvergenceError", "ConsistencyError", "DegenerateModuleError", "IllConditionedError",
    "CorrelationEstimate", "__version__",
]
