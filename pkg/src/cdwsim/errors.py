"""Exception types shared across the package."""


class LatticeError(ValueError):
    """Chain is too short or otherwise malformed (L >= 3 required)."""


class SumConditionError(ValueError):
    """Integer field cannot be a discrete Laplacian: components do not sum to zero."""


class DivisibilityError(ValueError):
    """Integer field cannot be a discrete Laplacian: weighted sum not divisible by L."""


class SlidingError(RuntimeError):
    """An avalanche attempted more than L jumps; the configuration is not pinned
    (or the input was invalid)."""


class NoExtentError(RuntimeError):
    """No avalanche extent exists within one period; the configuration is at or
    degenerately close to threshold."""


class IterationCapError(RuntimeError):
    """An evolution loop exceeded its iteration cap without terminating."""


class RecordStructureError(RuntimeError):
    """Threshold-to-threshold evolution violated the record/trapezoid structure.
    Carries diagnostics instead of silently accepting the state."""


class InfeasibleSizeError(ValueError):
    """Exhaustive search requested for a chain too long to enumerate."""
