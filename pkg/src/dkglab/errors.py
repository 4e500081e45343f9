"""Warning and exception types shared across the package."""


class DkglabWarning(UserWarning):
    pass


class AmbiguousClassification(DkglabWarning):
    """A decision quantity sits just below its threshold."""


class NearLightCone(DkglabWarning):
    """Velocity close to the maximal group speed; Newton is ill-conditioned."""


class RankDisagreement(DkglabWarning):
    """Numerical Hessian rank differs from the rank the case analysis predicts."""


class AliasingRisk(DkglabWarning):
    """Transform box too small for the light cone at this time."""


class BoundaryContamination(DkglabWarning):
    """The truncated ODE box is too close to the light cone."""


class Overflow(DkglabWarning):
    """Field amplitude exceeded the blow-up threshold."""


class InadmissiblePairWarning(DkglabWarning):
    """Norm computed for a pair outside the admissible range."""


class InvalidCriticalPoint(ValueError):
    pass


class InsufficientSpan(ValueError):
    pass


class InadmissiblePair(ValueError):
    pass


class DegenerateDenominator(ArithmeticError):
    pass


class MemoryBudgetExceeded(MemoryError):
    pass
