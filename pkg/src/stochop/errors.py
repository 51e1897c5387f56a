"""Exception vocabulary shared by all stochop modules."""


class StochopError(Exception):
    """Base class for all stochop-specific failures."""


class BudgetExceeded(StochopError):
    """An exhaustive search was requested beyond the configured budget."""


class CollisionModL(StochopError):
    """Two distinct covering boxes are congruent mod L; refine a, b or L."""


class AsymmetricMask(StochopError):
    """4D support mask is not symmetric under swapping (t,nu) <-> (t',nu')."""


class NotLeftInvertible(StochopError):
    """Restricted tensored frame is rank-deficient for this window."""


class ResidualTooLarge(StochopError):
    """Observed data is inconsistent with the declared support model."""

    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"relative residual {residual:.3e} exceeds tolerance {tolerance:.3e}"
        )


class SingularSubframe(StochopError):
    """Selected frame columns are numerically dependent; solve aborted."""


class TrainTooShort(StochopError):
    """Delta train misses impulses whose echoes reach the sampling window."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"train misses required impulse indices {self.missing}")


class InsufficientExtent(StochopError):
    """Response record does not cover the translates needed by the Zak sum."""


class SupportViolation(StochopError):
    """Residual energy outside the declared support boxes."""

    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"out-of-support residual {residual:.3e} exceeds tolerance {tolerance:.3e}"
        )


class UnsynthesizablePattern(StochopError):
    """Factor models cannot realize this pattern exactly; use the exact path."""


class FormatError(StochopError):
    """Serialized artifact is malformed or carries an unknown magic."""


class MetadataMismatch(StochopError):
    """Grid or train metadata disagrees across files of one dataset."""
