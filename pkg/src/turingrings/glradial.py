"""Homoclinic solver for the radial amplitude equation.

The far-field envelope of a ring pattern satisfies

    (d/ds + 1/(2s))^2 q = c0 q + c3 q^3,    s > 0,

which expands to  q'' + q'/s - q/(4 s^2) = c0 q + c3 q^3.  For c0 > 0 and
c3 < 0 this equation has a nontrivial single-hump solution decaying at
both ends,

    q(s) ~ q0 s^(1/2)                      as s -> 0,
    q(s) ~ q_plus s^(-1/2) e^(-sqrt(c0) s) as s -> infinity,

and the pair (q0, q_plus) is what downstream profile synthesis consumes.
Substituting a Frobenius series into the equation fixes the next small-s
term: q = q0 (s^(1/2) + (c0/6) s^(5/2)) + O(s^(7/2)), and the expansion
starts integration at s_min = 1e-3 clear of the 1/(4 s^2) singularity.

Shooting map empirics (for c3 < 0, determined by running the integrator;
neither side is documented anywhere authoritative): below the critical
amplitude q0* the trajectory undershoots, turns around while still
positive, and rings down onto the plateau sqrt(c0/|c3|) -- it exits at
s_max positive ("lingers").  Above q0* it overshoots the hump and
crosses zero.  The amplitude cap never fires on either side.

Bisection alone cannot deliver a clean trajectory on the whole window.
A bracket of width 1e-12 in q0 keeps the orbit near the homoclinic only
until the unstable mode e^(sqrt(c0) s) amplifies the residual mismatch
past the size of the decaying tail, at roughly s ~ 14/sqrt(c0).  The
bisected amplitude therefore seeds a collocation boundary-value solve
with q0 as a free parameter and the decay imposed at s_max through the
Robin condition q'(s_max) + (sqrt(c0) + 1/(2 s_max)) q(s_max) = 0, which
is exact for the pure tail.  That pins the tail at collocation accuracy
and refines q0 as a byproduct.

The tail amplitude q_plus comes from a least-squares fit of
log(q sqrt(s)) on s in [0.6, 0.85] s_max with the slope held at
-sqrt(c0); the unconstrained slope over the same window is kept as a
diagnostic.  evaluate() extends past s_max with the tail formula
anchored at the last stored sample (the Robin condition makes q and dq
exactly continuous there), and below s_min with the two-term series.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_bvp, solve_ivp
from scipy.interpolate import CubicSpline

from .errors import (
    ClassificationAmbiguous,
    DomainError,
    NoConvergence,
    StepFailure,
    Supercritical,
)

S_MIN = 1e-3
DECAY_FLOOR = 1e-10
BRACKET_WIDTH = 1e-12

# exit classes of a single shot
CROSSES_ZERO = "crosses_zero"      # first zero of q before s_max
GROWS_POSITIVE = "grows_positive"  # q exceeded the amplitude cap, no zero
DECAYED = "decayed"                # reached s_max with |q| below the floor
LINGERS = "lingers"                # reached s_max positive, above the floor


@dataclass(frozen=True)
class ShootResult:
    classification: str
    s: np.ndarray
    q: np.ndarray
    dq: np.ndarray


@dataclass(frozen=True)
class GLSolution:
    c0: float
    c3: float
    q0: float
    q_plus: float
    s_grid: np.ndarray
    q_samples: np.ndarray
    dq_samples: np.ndarray
    # unconstrained log-slope of q*sqrt(s) over the fit window; should sit
    # within a percent of -sqrt(c0)
    tail_slope: float


def _series_q(c0, c3, q0, s):
    # q = q0 s^(1/2) + (c0 q0/6) s^(5/2) + (c3 q0^3/12) s^(7/2) + O(s^(9/2))
    return (q0 * (np.sqrt(s) + (c0 / 6.0) * s ** 2.5)
            + (c3 * q0 ** 3 / 12.0) * s ** 3.5)


def _series_qprime(c0, c3, q0, s):
    return (q0 * (0.5 / np.sqrt(s) + (5.0 * c0 / 12.0) * s ** 1.5)
            + (7.0 * c3 * q0 ** 3 / 24.0) * s ** 2.5)


def _rhs(s, y, c0, c3):
    q, p = y
    return [p, c0 * q + c3 * q ** 3 - p / s + q / (4.0 * s * s)]


def shoot(c0: float, c3: float, q0_trial: float, s_max: float, *,
          rtol: float = 1e-10, atol: float = 1e-12,
          s_min: float = S_MIN) -> ShootResult:
    """Integrate outward from the series start; classify the exit."""
    if c0 <= 0.0:
        raise DomainError(f"c0 must be positive, got {c0}")
    if q0_trial <= 0.0:
        raise DomainError(f"q0_trial must be positive, got {q0_trial}")

    cap = 10.0 * np.sqrt(c0 / abs(c3)) if c3 != 0.0 else np.inf

    def hit_zero(s, y, *args):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1.0

    def hit_cap(s, y, *args):
        return y[0] - cap

    hit_cap.terminal = True
    hit_cap.direction = 1.0

    y0 = [_series_q(c0, c3, q0_trial, s_min),
          _series_qprime(c0, c3, q0_trial, s_min)]
    sol = solve_ivp(_rhs, (s_min, s_max), y0, method="DOP853",
                    rtol=rtol, atol=atol, args=(c0, c3),
                    events=(hit_zero, hit_cap))
    if sol.status < 0:
        raise StepFailure(f"integrator failed: {sol.message}")
    if sol.status == 1:
        cls = CROSSES_ZERO if len(sol.t_events[0]) else GROWS_POSITIVE
    elif abs(sol.y[0, -1]) <= DECAY_FLOOR:
        cls = DECAYED
    else:
        cls = LINGERS
    q = sol.y[0]
    dq = sol.y[1] + q / (2.0 * sol.t)
    return ShootResult(cls, sol.t, q, dq)


def find_homoclinic(c0: float, c3: float, *, s_max: float = None,
                    rtol: float = 1e-10, atol: float = 1e-12,
                    bvp_tol: float = 1e-10,
                    n_samples: int = 4001) -> GLSolution:
    """Bisect the shooting amplitude, then refine by collocation."""
    if c0 <= 0.0:
        raise DomainError(f"c0 must be positive, got {c0}")
    if c3 >= 0.0:
        raise Supercritical(
            f"c3={c3}: the only bounded decaying solution is trivial")
    if s_max is None:
        s_max = 30.0 / np.sqrt(c0)

    q0_upper = 4.0 * np.sqrt(c0 / abs(c3)) * c0 ** 0.25

    def crosses(q0):
        return shoot(c0, c3, q0, s_max,
                     rtol=rtol, atol=atol).classification == CROSSES_ZERO

    hi = q0_upper
    if not crosses(hi):
        raise ClassificationAmbiguous(
            f"no zero-crossing shot found at the bracket top q0={hi:g}")
    lo = hi
    for _ in range(60):
        lo *= 0.5
        if not crosses(lo):
            break
    else:
        raise ClassificationAmbiguous(
            "every trial amplitude crossed zero; no lower bracket")
    while hi - lo > BRACKET_WIDTH:
        mid = 0.5 * (lo + hi)
        if crosses(mid):
            hi = mid
        else:
            lo = mid
    q0_bisect = 0.5 * (lo + hi)

    # collocation refinement seeded by a dense shot near the bracket,
    # tail-extended past the point where the shot departs the homoclinic
    shot = solve_ivp(_rhs, (S_MIN, s_max),
                     [_series_q(c0, c3, q0_bisect, S_MIN),
                      _series_qprime(c0, c3, q0_bisect, S_MIN)],
                     method="DOP853", rtol=rtol, atol=atol,
                     args=(c0, c3), dense_output=True)
    if shot.status < 0:
        raise StepFailure(f"integrator failed: {shot.message}")
    s_cut = min(12.0 / np.sqrt(c0), 0.5 * s_max, shot.t[-1])
    # grade the mesh like sqrt(s) so the s^(1/2) layer at the left end is
    # resolved before adaptive refinement starts
    left = np.linspace(np.sqrt(S_MIN), np.sqrt(s_cut), 1200) ** 2
    left[0], left[-1] = S_MIN, s_cut
    mesh = np.concatenate([left, np.linspace(s_cut, s_max, 400)[1:]])
    y_guess = np.empty((2, len(mesh)))
    inside = mesh <= s_cut
    y_guess[:, inside] = shot.sol(mesh[inside])[:2]
    q_cut, p_cut = shot.sol(s_cut)[:2]
    tail = mesh[~inside]
    rate = np.sqrt(c0)
    decay = np.sqrt(s_cut / tail) * np.exp(-rate * (tail - s_cut))
    y_guess[0, ~inside] = q_cut * decay
    y_guess[1, ~inside] = q_cut * decay * (-rate - 0.5 / tail)

    def bvp_rhs(s, y, p):
        return np.vstack([y[1],
                          c0 * y[0] + c3 * y[0] ** 3
                          - y[1] / s + y[0] / (4.0 * s * s)])

    def bvp_bc(ya, yb, p):
        q0 = p[0]
        return np.array([
            ya[0] - _series_q(c0, c3, q0, S_MIN),
            ya[1] - _series_qprime(c0, c3, q0, S_MIN),
            yb[1] + (rate + 0.5 / s_max) * yb[0],
        ])

    bvp = solve_bvp(bvp_rhs, bvp_bc, mesh, y_guess, p=[q0_bisect],
                    tol=bvp_tol, max_nodes=200000)
    if not bvp.success:
        raise NoConvergence(f"collocation refinement failed: {bvp.message}")

    q0 = float(bvp.p[0])
    s_grid = np.linspace(S_MIN, s_max, n_samples)
    yq, yp = bvp.sol(s_grid)[:2]
    dq = yp + yq / (2.0 * s_grid)

    window = (s_grid >= 0.6 * s_max) & (s_grid <= 0.85 * s_max)
    if np.any(yq[window] <= 0.0):
        raise NoConvergence("tail window touched zero; fit impossible")
    logs = np.log(yq[window] * np.sqrt(s_grid[window]))
    q_plus = float(np.exp(np.mean(logs + rate * s_grid[window])))
    slope = float(np.polyfit(s_grid[window], logs, 1)[0])

    return GLSolution(float(c0), float(c3), q0, q_plus,
                      s_grid, yq, dq, slope)


def evaluate(sol: GLSolution, s):
    """(q, dq) at arbitrary s > 0: spline inside the stored window,
    series below it, anchored tail above it."""
    arr = np.asarray(s, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr <= 0.0):
        raise DomainError("s must be positive")
    q = np.empty_like(arr)
    dq = np.empty_like(arr)
    s_lo, s_hi = sol.s_grid[0], sol.s_grid[-1]
    c0, q0 = sol.c0, sol.q0

    below = arr < s_lo
    if np.any(below):
        sb = arr[below]
        q[below] = _series_q(c0, sol.c3, q0, sb)
        dq[below] = (q0 * (1.0 / np.sqrt(sb) + 0.5 * c0 * sb ** 1.5)
                     + (sol.c3 * q0 ** 3 / 3.0) * sb ** 2.5)

    inside = (arr >= s_lo) & (arr <= s_hi)
    if np.any(inside):
        # q and dq carry sqrt(s) singularities at the origin; q/sqrt(s)
        # and dq*sqrt(s) expand in integer powers, so spline those
        si = arr[inside]
        root = np.sqrt(sol.s_grid)
        q[inside] = np.sqrt(si) * CubicSpline(
            sol.s_grid, sol.q_samples / root)(si)
        dq[inside] = CubicSpline(
            sol.s_grid, sol.dq_samples * root)(si) / np.sqrt(si)

    above = arr > s_hi
    if np.any(above):
        sa = arr[above]
        rate = np.sqrt(c0)
        q[above] = (sol.q_samples[-1] * np.sqrt(s_hi / sa)
                    * np.exp(-rate * (sa - s_hi)))
        dq[above] = -rate * q[above]

    if scalar:
        return float(q[0]), float(dq[0])
    return q, dq
