"""Error hierarchy for the toolkit.

Mathematical failures found by checkers are verdicts, not exceptions; the
classes below signal that an operation could not produce its result.
"""
from typing import Any, Dict, Optional


class ToolkitError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}


class NonNormalizable(ToolkitError):
    """Kernel keeps too little mass on the grid to be renormalized."""


class GridMismatch(ToolkitError):
    """Operands live on different grids, or a reduction cannot be resolved."""


class EmptyTruncation(ToolkitError):
    """Truncation region removed every kernel weight."""


class NoRoot(ToolkitError):
    """No carrying capacity found for the competition operator."""


class NoConvergence(ToolkitError):
    """Picard iteration did not contract within the iteration budget."""

    def __init__(self, message: str, max_iter: int, residual: float, dt: float):
        super().__init__(message, {"max_iter": max_iter, "residual": residual, "dt": dt})
        self.max_iter = max_iter
        self.residual = residual
        self.dt = dt


class DomainExceeded(ToolkitError):
    """Profile lattice does not cover the requested planar slab."""


class NoStall(ToolkitError):
    """Weinberger iteration did not stall within n_max iterations."""

    def __init__(self, message: str, n_max: int, profile: Any = None, history: Any = None, fronts: Any = None):
        super().__init__(message, {"n_max": n_max})
        self.n_max = n_max
        self.profile = profile
        self.history = list(history or [])
        self.fronts = list(fronts or [])


class MonotonicityViolation(ToolkitError):
    """Weinberger iterates decreased in n beyond tolerance."""


class BracketNotFound(ToolkitError):
    """Bisection bracket could not be widened to straddle the dichotomy."""


class NoNondegeneracy(ToolkitError):
    """Kernel has no positive nondegeneracy radius."""


class NotASubsolution(ToolkitError):
    """No validity threshold T up to the cap certifies the sub-solution."""


class QTooLarge(ToolkitError):
    """Sub-solution amplitude exceeds the admissible cap q0."""


class PreconditionFail(ToolkitError):
    """Input data do not meet the operation's precondition."""


class SeamViolation(ToolkitError):
    """Moving window comes too close to the torus seam."""


class NoCrossing(ToolkitError):
    """Field never crosses the tracked level along the direction."""


class IterationCap(ToolkitError):
    """Iteration cap reached before the target was met."""


class ConfigError(ToolkitError):
    """Experiment configuration is malformed or inconsistent."""
