"""
Exception hierarchy for isoflow.

Every failure the engine can report derives from IsoflowError so the CLI can
print it and exit cleanly. Argument-type failures also derive from ValueError,
numerical breakdowns from ArithmeticError.
"""


class IsoflowError(Exception):
    """Base class for all isoflow errors."""


class ConfigError(IsoflowError, ValueError):
    """Experiment configuration is invalid."""


class MeshTopologyError(IsoflowError, ValueError):
    """Mesh is not a closed, consistently oriented genus-0 surface."""


class MeshMismatch(IsoflowError, ValueError):
    """Operands live on different meshes or spaces."""


class UnsupportedDegree(IsoflowError, ValueError):
    """Requested polynomial or quadrature degree is out of range."""


class BoundaryEdge(IsoflowError, ValueError):
    """Edge has a single incident triangle."""


class InvalidStep(IsoflowError, ValueError):
    """Time step size is not positive."""


class OutOfInterval(IsoflowError, ValueError):
    """Time lies outside the validity interval of a metric source."""


class DegenerateProfile(IsoflowError, ValueError):
    """Axisymmetric profile has m <= 0 away from the poles."""


class ClosestPointDiverged(IsoflowError, ArithmeticError):
    """Closest point iteration did not converge."""


class SingularLocalSolve(IsoflowError, ArithmeticError):
    """Local degree-of-freedom matrix is singular."""


class IndefiniteMetric(IsoflowError, ArithmeticError):
    """Metric is not positive definite at a quadrature point."""


class DegenerateReference(IsoflowError, ArithmeticError):
    """Reference embedding has rank-deficient chart gradients."""


class SingularSystem(IsoflowError, ArithmeticError):
    """Saddle point factorization failed."""


class GramSingular(IsoflowError, ArithmeticError):
    """Gram matrix of the rigid motions is singular."""


class CurvatureNegative(IsoflowError, ArithmeticError):
    """Gaussian curvature became non-positive."""


class StepUnstable(IsoflowError, ArithmeticError):
    """Explicit integration produced non-finite values."""


class ExportError(IsoflowError, OSError):
    """Output file could not be written or parsed."""


class FlowAborted(IsoflowError):
    """
    A flow stopped before reaching its end time.
    Carries the partial trajectory so callers can still report diagnostics.
    """

    def __init__(self, message: str, trajectory=None, cause: Exception | None = None):
        super().__init__(message)
        self.trajectory = trajectory
        self.cause = cause
