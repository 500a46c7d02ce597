"""Exception types shared across the package."""


class TuringRingsError(Exception):
    """Base class for all package-specific errors."""


class NotTuring(TuringRingsError):
    """The linearization does not sit at a Turing point (det(M1 + kc^2) != 0)."""


class NotDoubleEigenvalue(TuringRingsError):
    """The critical eigenvalue is not algebraically double / geometrically simple."""


class DomainError(TuringRingsError):
    """Argument outside the mathematical domain of the operation."""


class DimensionMismatch(TuringRingsError):
    """Array argument has the wrong length or shape."""


class NoConvergence(TuringRingsError):
    """An iterative solve failed to reach its tolerance."""


class StepFailure(TuringRingsError):
    """An adaptive integrator could not complete a step."""


class Supercritical(TuringRingsError):
    """c3 >= 0: the far-field equation has no nontrivial bounded solution."""


class ClassificationAmbiguous(TuringRingsError):
    """Shooting could not bracket the homoclinic between its two exit classes."""


class SingularJacobian(TuringRingsError):
    """A Newton linearization was numerically singular."""
