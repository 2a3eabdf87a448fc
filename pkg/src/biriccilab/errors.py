"""Exception hierarchy shared by every module."""

from __future__ import annotations


class GeometryError(Exception):
    """Base class for all numerical-geometry failures."""


class DomainError(GeometryError):
    """Evaluation point outside a chart domain (or too close to its edge)."""


class PositivityError(GeometryError):
    """Metric not positive definite, or a conformal factor not positive.

    Carries the offending pivot / eigenvalue when available.
    """

    def __init__(self, message: str, pivot: float | None = None):
        super().__init__(message)
        self.pivot = pivot


class FrameError(GeometryError):
    """Vectors fail an orthonormality or unit-norm precondition."""


class SubspaceError(GeometryError):
    """Invalid subspace input (trivial, full, or v not contained in V)."""


class PathError(GeometryError):
    """A geodesic path fails a precondition (too short, wrong speed, ...)."""


class IntegrationError(GeometryError):
    """Step failure inside an ODE integrator."""


class InadmissibleSpec(GeometryError):
    """A bound specification violates its admissibility window."""


class EmbeddingError(GeometryError):
    """Rank-deficient or otherwise invalid hypersurface embedding."""


class SolverError(GeometryError):
    """Eigen/linear solver did not converge; carries the last residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ConstructionError(GeometryError):
    """Neck-profile construction failed (no admissible constant, bad window)."""


class CertificationError(GeometryError):
    """A certified inequality was violated on the certification grid."""


class ManifestError(GeometryError):
    """Malformed manifest, unresolved reference, or bad task ordering."""
