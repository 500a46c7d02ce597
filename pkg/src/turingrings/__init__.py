"""Localized dihedral ring patterns near a Turing instability.

Construct, classify and verify approximate ring solutions of
two-component reaction-diffusion systems close to onset: matching
equation root tables, radial Ginzburg-Landau homoclinics, piecewise
radial profiles, Galerkin residual checks and the large-N continuum
limit.
"""

from .errors import (
    ClassificationAmbiguous,
    DimensionMismatch,
    DomainError,
    NoConvergence,
    NotDoubleEigenvalue,
    NotTuring,
    SingularJacobian,
    StepFailure,
    Supercritical,
    TuringRingsError,
)
from .rdsys import (
    BifCoefficients,
    RDSystem,
    TuringData,
    check_subcriticality,
    coefficients,
    parse_system_file,
    sh_system,
    verify_turing,
)
from .specfun import BesselEval, bessel_j, bessel_y
from .matching import (
    MatchProblem,
    MatchSolution,
    SolveOptions,
    canonicalize,
    classify,
    cubic_map,
    harmonic_lift,
    jacobian,
    primitive_solutions,
    solve_matching,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
