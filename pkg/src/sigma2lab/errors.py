"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class Sigma2LabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(Sigma2LabError, ValueError):
    """Argument outside the admissible domain."""


class DegenerateCoefficient(Sigma2LabError):
    """The coefficient multiplying the highest derivative vanished."""


class ShootingFailed(Sigma2LabError):
    """No admissible connecting orbit was found."""


class ConeViolation(Sigma2LabError):
    """A tensor expected in the positive cone is not."""


class GridMismatch(Sigma2LabError, ValueError):
    """Grid function and coefficient grid are incompatible."""


class IndicialWeight(Sigma2LabError, ValueError):
    """Weight exponent coincides with an indicial root."""


class RegimeError(Sigma2LabError, ValueError):
    """No solution exists in the requested weighted space."""


class DivergentNorm(Sigma2LabError):
    """Weighted integrand does not decay at the ends of the grid."""


class QuadratureFailure(Sigma2LabError):
    """Quadrature did not reach the requested accuracy."""


class MarginViolation(Sigma2LabError):
    """Cone positivity fails under the admissible perturbation."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class InvalidJunctions(Sigma2LabError, ValueError):
    """Junction radii of the cutoff are not ordered."""


class RegionOverlap(Sigma2LabError, ValueError):
    """Gluing regions overlap or are too close."""
