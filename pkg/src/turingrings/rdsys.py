"""Two-component reaction-diffusion systems at a Turing point.

A system is stored through the Taylor data of its steady-state equation,
written with the sign convention

    0 = Lap(u) - M1 u - mu M2 u - Q(u,u) - C(u,u,u),

where u(x) in R^2, M1 is the (diffusion-scaled) linearization at the
bifurcation point, M2 the mu-derivative of the linear part, and Q, C the
symmetric quadratic and cubic terms.  Hypotheses checked here:

* Turing point with critical wavenumber kc = 1: det(M1 + I) = 0, and the
  eigenvalue -1 of M1 is algebraically double but geometrically simple,
  giving a Jordan chain  (M1 + I) U0 = 0,  (M1 + I) U1 = U0.
* Subcriticality: c0 > 0 and c3 < 0 for the coefficients defined below.

The Swift-Hohenberg equation  u_t = -(1+Lap)^2 u - mu u + gamma u^2 - u^3
is cast into this form with u = (u, (1+Lap)u).  Substituting directly:
component 1 gives Lap u1 = u2 - u1, hence M1 row (-1, 1); component 2
satisfies Lap u2 = -u2 - mu u1 + gamma u1^2 - u1^3, so M1 row (0, -1),
M2 row (-1, 0), Q(u,v)_2 = gamma u1 v1 and C(u,v,w)_2 = -u1 v1 w1, with
all first-component nonlinear terms zero.

Amplitude coefficients driving the downstream modules:

    c0 = (1/4) <U1*, -M2 U0>
    c3 = -[(5/6 (<U0*,Q00> + <U1*,Q01>) + 19/18 <U1*,Q00>) <U1*,Q00>
           + 3/4 <U1*,C000>]
    nu = (1/2) sqrt(pi/6) <U1*, Q(U0,U0)>

For Swift-Hohenberg these reduce to c0 = 1/4 and c3 = 3/4 - 19 gamma^2/18,
so the subcritical range is gamma^2 > 27/38.
"""

from __future__ import annotations

from dataclasses import dataclass
import itertools
import math

import numpy as np

from .errors import NotTuring, NotDoubleEigenvalue

_REL_TOL = 1e-9  # multiplicity / determinant tests, relative to ||M1||


def _symmetrize_q(q: np.ndarray) -> np.ndarray:
    return 0.5 * (q + np.swapaxes(q, 1, 2))


def _symmetrize_c(c: np.ndarray) -> np.ndarray:
    out = np.zeros_like(c)
    for perm in itertools.permutations((1, 2, 3)):
        out += np.transpose(c, (0,) + perm)
    return out / 6.0


@dataclass(frozen=True)
class RDSystem:
    """Taylor data (M1, M2, Q, C) of a system in the sign convention above.

    Q has shape (2, 2, 2): Q[c, i, j] is the coefficient of u_i v_j in
    component c.  C has shape (2, 2, 2, 2) analogously.  Both are
    symmetrized on construction so that Q(u,v) = Q(v,u) and C is invariant
    under argument permutations.
    """

    M1: np.ndarray
    M2: np.ndarray
    Q: np.ndarray
    C: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "M1", np.asarray(self.M1, dtype=float).reshape(2, 2))
        object.__setattr__(self, "M2", np.asarray(self.M2, dtype=float).reshape(2, 2))
        q = np.asarray(self.Q, dtype=float).reshape(2, 2, 2)
        c = np.asarray(self.C, dtype=float).reshape(2, 2, 2, 2)
        object.__setattr__(self, "Q", _symmetrize_q(q))
        object.__setattr__(self, "C", _symmetrize_c(c))

    def quad(self, u, v) -> np.ndarray:
        """Q(u, v), a 2-vector."""
        return np.einsum("cij,i,j->c", self.Q, u, v)

    def cubic(self, u, v, w) -> np.ndarray:
        """C(u, v, w), a 2-vector."""
        return np.einsum("cijk,i,j,k->c", self.C, u, v, w)


@dataclass(frozen=True)
class TuringData:
    kc: float
    U0: np.ndarray
    U1: np.ndarray
    U0s: np.ndarray
    U1s: np.ndarray


@dataclass(frozen=True)
class BifCoefficients:
    c0: float
    c3: float
    nu: float


def sh_system(gamma: float) -> RDSystem:
    """First-order cast of Swift-Hohenberg with quadratic strength gamma."""
    q = np.zeros((2, 2, 2))
    q[1, 0, 0] = gamma
    c = np.zeros((2, 2, 2, 2))
    c[1, 0, 0, 0] = -1.0
    return RDSystem(
        M1=np.array([[-1.0, 1.0], [0.0, -1.0]]),
        M2=np.array([[0.0, 0.0], [-1.0, 0.0]]),
        Q=q,
        C=c,
        label=f"swift-hohenberg gamma={gamma:g}",
    )


def verify_turing(sys: RDSystem) -> TuringData:
    """Check Hypothesis-1 structure of M1 and build the eigenvector chain.

    Raises NotTuring when det(M1 + I) != 0, NotDoubleEigenvalue when -1 is
    not an algebraically double, geometrically simple eigenvalue.  The
    chain is normalized deterministically: U0 scaled so its largest entry
    is +1, U1 the minimal-norm solution of (M1 + I) U1 = U0 (which is
    automatically orthogonal to U0's kernel direction), adjoints from the
    inverse of [U0 U1].
    """
    m1 = sys.M1
    scale = max(np.linalg.norm(m1), 1.0)
    tol = _REL_TOL * scale
    a = m1 + np.eye(2)
    if abs(np.linalg.det(a)) > tol * scale:
        raise NotTuring(f"det(M1 + I) = {np.linalg.det(a):.3e}, not a kc=1 Turing point")
    # algebraic multiplicity 2 <=> trace = -2 (char. poly (x+1)^2)
    if abs(np.trace(m1) + 2.0) > tol:
        raise NotDoubleEigenvalue("eigenvalue -1 of M1 is algebraically simple")
    # geometric simplicity <=> M1 + I has rank 1
    if np.abs(a).max() <= tol:
        raise NotDoubleEigenvalue("eigenvalue -1 of M1 is geometrically double")

    # kernel direction from the SVD, gauge-fixed
    _, svals, vt = np.linalg.svd(a)
    u0 = vt[-1]
    pivot = np.argmax(np.abs(u0))
    u0 = u0 / u0[pivot] + 0.0  # +0.0 clears negative zeros
    if svals[0] <= tol:
        raise NotDoubleEigenvalue("M1 + I vanishes")

    u1, *_ = np.linalg.lstsq(a, u0, rcond=None)
    if np.linalg.norm(a @ u1 - u0) > 1e-10 * scale:
        raise NotDoubleEigenvalue("Jordan chain equation (M1+I) U1 = U0 unsolvable")

    v = np.column_stack([u0, u1])
    w = np.linalg.inv(v)
    return TuringData(kc=1.0, U0=u0, U1=u1, U0s=w[0].copy(), U1s=w[1].copy())


def coefficients(sys: RDSystem) -> BifCoefficients:
    """Bifurcation coefficients c0, c3 and the core constant nu."""
    td = verify_turing(sys)
    u0, u1, u0s, u1s = td.U0, td.U1, td.U0s, td.U1s
    c0 = 0.25 * float(u1s @ (-sys.M2 @ u0))
    q00 = sys.quad(u0, u0)
    q01 = sys.quad(u0, u1)
    c000 = sys.cubic(u0, u0, u0)
    g = float(u1s @ q00)
    c3 = -(
        (5.0 / 6.0 * (float(u0s @ q00) + float(u1s @ q01)) + 19.0 / 18.0 * g) * g
        + 0.75 * float(u1s @ c000)
    )
    nu = 0.5 * math.sqrt(math.pi / 6.0) * g
    return BifCoefficients(c0=c0, c3=c3, nu=nu)


def check_subcriticality(sys: RDSystem) -> bool:
    """True iff c0 > 0 and c3 < 0 (Turing hypotheses must already hold)."""
    co = coefficients(sys)
    return co.c0 > 0.0 and co.c3 < 0.0


def parse_system_file(text: str) -> RDSystem:
    """Parse the plain-text system format used by the CLI.

    Lines are ``key = value`` with ``#`` comments.  Keys: ``M1``/``M2``
    (4 numbers, row-major), ``Q`` (8 numbers, component-major then
    row-major), ``C`` (16 numbers, component-major), ``label`` (free
    text).  The single line ``sh gamma=<val>`` is shorthand for the
    Swift-Hohenberg cast.

    Raises ValueError with a diagnostic on malformed input.
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sh = line.replace(" ", "")
        if sh.startswith("shgamma="):
            try:
                return sh_system(float(sh[len("shgamma="):]))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad gamma value ({exc})") from None
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        entries[key.strip()] = val.strip()

    def grab(key: str, count: int) -> np.ndarray:
        if key not in entries:
            raise ValueError(f"missing key {key!r}")
        parts = entries[key].replace(",", " ").split()
        if len(parts) != count:
            raise ValueError(f"{key}: expected {count} numbers, got {len(parts)}")
        try:
            return np.array([float(p) for p in parts])
        except ValueError as exc:
            raise ValueError(f"{key}: {exc}") from None

    return RDSystem(
        M1=grab("M1", 4).reshape(2, 2),
        M2=grab("M2", 4).reshape(2, 2),
        Q=grab("Q", 8).reshape(2, 2, 2),
        C=grab("C", 16).reshape(2, 2, 2, 2),
        label=entries.get("label", ""),
    )
