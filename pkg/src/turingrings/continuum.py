"""Continuum limit of the even-order matching equation.

For even dihedral order the cubic matching equation collapses to
a_n = sum_{i+j+k=n} a_|i| a_|j| a_|k| over |i|,|j|,|k| <= N, with no
remaining dependence on the order itself.  Plotting solutions as points
(n/N, N a_n) reveals a family collapsing onto a single curve as N grows:
the triple sum is a Riemann sum, and the rescaled limit alpha: [0,1] -> R
satisfies a cubic integral fixed point equation alpha = A(alpha).

Splitting the lattice sum by the signs of (i, j, k) produces seven double
integrals (sectors with all indices positive, one negative, and so on,
boundary terms folding together).  Every sector factors through one of
three inner kernels,

    G1(s) = int_0^{1-s} alpha(x) alpha(s+x) dx     (autocorrelation)
    G2(s) = int_0^s     alpha(x) alpha(s-x) dx     (autoconvolution)
    G3(s) = int_0^{1-s} alpha(s+x) alpha(1-x) dx   (end-reflected)

so A(alpha)(t) costs two passes of one-dimensional quadratures.  On the
uniform grid t_k = k/(M-1) every argument above lands exactly on a grid
point, and the nested trapezoid rule needs no interpolation at all; the
zero-width inner ranges at the sector corners contribute exactly zero.

Newton for the fixed point uses an exact Jacobian obtained without any
hand differentiation: for a homogeneous cubic map,

    A(a + v) - A(a - v) = 2 A'(a) v + 2 A(v)

identically, so the symmetric difference with the *unit* step recovers
A'(a) v to rounding once A(e_j) is subtracted.  The columns A(e_j) do not
depend on the current iterate and are computed once per solve.

The discrete seed comes from the positive solution family: the unique
all-positive root of the published N=4 table, continued upward one
truncation order at a time by appending a zero and re-solving with damped
Newton.  Doubling N between Newton solves (pad 4 -> 8 -> 16) looks
cheaper but deterministically hops onto sign-mixed roots; single steps
keep every iterate on the positive branch through N = 200.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, DomainError, NoConvergence
from .matching import MatchProblem, cubic_map, jacobian
from .tables import reference_list


def _trapz(y: np.ndarray, h: float) -> float:
    """Uniform trapezoid rule; a zero-width range (< 2 samples) is 0."""
    if y.size < 2:
        return 0.0
    return h * (float(y.sum()) - 0.5 * (float(y[0]) + float(y[-1])))


def continuum_apply(alpha, M: int) -> np.ndarray:
    """Right-hand side A(alpha) of the continuum matching equation.

    Evaluates the seven sector integrals at every t_k = k/(M-1) by nested
    trapezoid quadrature.  Cubically homogeneous in alpha.
    """
    if M < 8:
        raise DimensionMismatch(f"continuum grid needs M >= 8 points, got {M}")
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (M,):
        raise DimensionMismatch(f"expected {M} samples, got shape {alpha.shape}")
    h = 1.0 / (M - 1)

    G1 = np.array([_trapz(alpha[: M - j] * alpha[j:], h) for j in range(M)])
    G2 = np.array([_trapz(alpha[: j + 1] * alpha[j::-1], h) for j in range(M)])
    G3 = np.array([_trapz(alpha[j:] * alpha[::-1][: M - j], h) for j in range(M)])

    out = np.empty(M)
    for k in range(M):
        w = M - k  # samples on the outer range [0, 1-t]
        out[k] = (
            2.0 * _trapz(alpha[k:] * G1[:w], h)      # alpha(t+s) G1(s)
            + 2.0 * _trapz(alpha[:w] * G1[k:], h)    # alpha(s)   G1(s+t)
            + _trapz(alpha[k:] * G2[:w], h)          # alpha(t+s) G2(s)
            + _trapz(alpha[:w] * G2[k:], h)          # alpha(s)   G2(s+t)
            + 2.0 * _trapz(alpha[k::-1] * G1[: k + 1], h)   # alpha(t-s) G1(s)
            + _trapz(alpha[k::-1] * G2[: k + 1], h)         # alpha(t-s) G2(s)
            + _trapz(alpha[M - 1 - k :] * G3[: k + 1], h)   # alpha(s+1-t) G3(s)
        )
    return out


# ---------------------------------------------------------------------------
# positive discrete family


def _polish(N: int, seed: np.ndarray, tol: float = 1e-13, max_iter: int = 100):
    """Damped Newton on a - C(a) for the even-parity problem at order N."""
    p = MatchProblem(2, N)
    a = np.asarray(seed, dtype=float).copy()
    F = a - cubic_map(p, a)
    merit = float(np.linalg.norm(F))
    for _ in range(max_iter):
        if np.max(np.abs(F)) <= tol:
            return a
        J = np.eye(N + 1) - jacobian(p, a)
        step = np.linalg.solve(J, -F)
        alpha = 1.0
        while alpha >= 1.0 / 1024.0:
            trial = a + alpha * step
            Ft = trial - cubic_map(p, trial)
            if np.linalg.norm(Ft) <= (1.0 - 1e-4 * alpha) * merit:
                a, F = trial, Ft
                merit = float(np.linalg.norm(Ft))
                break
            alpha *= 0.5
        else:
            raise NoConvergence(f"discrete polish rejected every step at N={N}")
    if np.max(np.abs(F)) > tol:
        raise NoConvergence(f"discrete polish stalled at N={N}")
    return a


_branch_cache: dict = {}


def positive_branch(N: int) -> np.ndarray:
    """The all-positive matching solution at truncation N (even order).

    Base of the family: the unique entry of the published N=4 list with
    every component positive, Newton-polished to full precision.  Higher
    truncations are reached by appending one zero at a time and
    re-polishing, which stays on the positive branch.
    """
    if N < 4:
        raise DomainError(f"the positive family is continued from N=4 upward, got N={N}")
    if not _branch_cache:
        bases = [t for t in reference_list(2, 4) if all(v > 0.0 for v in t)]
        if len(bases) != 1:
            raise DomainError("published N=4 list does not have a unique positive root")
        _branch_cache[4] = _polish(4, np.array(bases[0]))
    top = max(_branch_cache)
    for n in range(top + 1, N + 1):
        padded = np.append(_branch_cache[n - 1], 0.0)
        a = _polish(n, padded)
        if not np.all(a > 0.0):
            raise NoConvergence(f"positive branch lost positivity at N={n}")
        _branch_cache[n] = a
    return _branch_cache[N].copy()


# ---------------------------------------------------------------------------
# continuum solve


@dataclass(frozen=True)
class ContinuumSolution:
    t_grid: np.ndarray
    alpha: np.ndarray
    residual_norm: float


def solve_continuum(M: int, tol: float = 1e-12, max_iter: int = 40) -> ContinuumSolution:
    """Positive solution of alpha = A(alpha) on M uniform grid points.

    Seeded by linear interpolation of the rescaled (n/N, N a_n) points of
    the discrete positive branch at N = 80; Newton with the exact
    cubic-map Jacobian then converges in a handful of steps.
    """
    if M < 32:
        raise DomainError(f"continuum solve needs M >= 32, got {M}")
    a80 = positive_branch(80)
    t = np.linspace(0.0, 1.0, M)
    alpha = np.interp(t, np.arange(81) / 80.0, 80.0 * a80)

    eye = np.eye(M)
    basis_cols = np.array([continuum_apply(eye[j], M) for j in range(M)]).T
    for _ in range(max_iter):
        F = alpha - continuum_apply(alpha, M)
        rn = float(np.max(np.abs(F)))
        if rn <= tol:
            if not np.all(alpha > 0.0):
                raise NoConvergence("Newton left the positive branch")
            return ContinuumSolution(t_grid=t, alpha=alpha, residual_norm=rn)
        JA = np.empty((M, M))
        for j in range(M):
            JA[:, j] = 0.5 * (
                continuum_apply(alpha + eye[j], M)
                - continuum_apply(alpha - eye[j], M)
            ) - basis_cols[:, j]
        alpha = alpha - np.linalg.solve(eye - JA, F)
    raise NoConvergence(f"continuum Newton stalled at ||res||_inf={rn:.3e}")


# ---------------------------------------------------------------------------
# large-N convergence


@dataclass(frozen=True)
class ConvergenceTable:
    """Sup distances between rescaled discrete solutions (and the limit)."""

    pairs: tuple          # (N1, N2, sup distance) for every input pair N1 < N2
    to_continuum: tuple   # (N, sup distance to the continuum solution)


def _rescaled(N: int, a: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.interp(t, np.arange(N + 1) / N, N * np.asarray(a, dtype=float))


def compare_large_N(
    solutions: Sequence[tuple], continuum: Optional[ContinuumSolution] = None, M: int = 129
) -> ConvergenceTable:
    """Rescale (N, a) solutions to (n/N, N a_n) and measure sup distances.

    All inputs are interpolated onto the continuum grid; the table holds
    every pairwise distance in input order plus each solution's distance
    to the continuum fixed point (solved at grid size M when not given).
    """
    if len(solutions) < 2:
        raise DimensionMismatch("need at least two solutions to compare")
    for N, a in solutions:
        if np.asarray(a).shape != (N + 1,):
            raise DimensionMismatch(
                f"solution at N={N} has shape {np.asarray(a).shape}, wanted ({N + 1},)"
            )
    if continuum is None:
        continuum = solve_continuum(M)
    t = continuum.t_grid
    curves = [(N, _rescaled(N, a, t)) for N, a in solutions]
    pairs = []
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            d = float(np.max(np.abs(curves[i][1] - curves[j][1])))
            pairs.append((curves[i][0], curves[j][0], d))
    to_cont = [
        (N, float(np.max(np.abs(c - continuum.alpha)))) for N, c in curves
    ]
    return ConvergenceTable(pairs=tuple(pairs), to_continuum=tuple(to_cont))


# ---------------------------------------------------------------------------
# artifacts


def write_solution(path, sol: ContinuumSolution) -> None:
    """Solution CSV: t,alpha rows."""
    lines = ["t,alpha"]
    for t, a in zip(sol.t_grid, sol.alpha):
        lines.append(f"{float(t)!r},{float(a)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_comparison(path, table: ConvergenceTable) -> None:
    """Convergence CSV: N1,N2,sup_distance; the limit rows use N2=continuum."""
    lines = ["N1,N2,sup_distance"]
    for n1, n2, d in table.pairs:
        lines.append(f"{n1},{n2},{float(d)!r}")
    for n, d in table.to_continuum:
        lines.append(f"{n},continuum,{float(d)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
