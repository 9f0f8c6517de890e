"""Exception types shared across the package."""


class IbvsimError(Exception):
    """Base class for all package errors."""


class EmptyRegion(IbvsimError):
    """Image or region has zero total mass; no feature is visible."""


class DegeneratePolygon(IbvsimError):
    """Polygon has non-positive area."""


class NonPositiveArea(IbvsimError):
    """Second-moment area term is not strictly positive."""


class NonPositiveDepth(IbvsimError):
    """Depth must be strictly positive."""


class SingularInteraction(IbvsimError):
    """Interaction matrix is numerically singular."""


class SingularModel(IbvsimError):
    """Prediction model matrix is invalid (non-finite or degenerate)."""


class DimensionMismatch(IbvsimError):
    """Inconsistent array dimensions in an optimization problem."""


class SingularInnovation(IbvsimError):
    """Innovation covariance is not invertible."""


class TargetBehindCamera(IbvsimError):
    """Camera is on the wrong side of the target plane."""


class TrialDiverged(IbvsimError):
    """Closed-loop error norm exceeded the divergence limit."""


class ConfigError(IbvsimError):
    """One or more configuration invariants are violated."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
