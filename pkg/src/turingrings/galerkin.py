"""Radial Galerkin discretization with Newton refinement and mu-continuation.

The cosine truncation u(r,theta) = u_0(r) + 2*sum_n u_n(r)cos(m*n*theta)
reduces the planar steady problem to N+1 coupled radial systems

    0 = Delta_n u_n - M1 u_n - mu M2 u_n
        - sum_{i+j=n} Q(u_|i|, u_|j|) - sum_{i+j+k=n} C(u_|i|, u_|j|, u_|k|),

with Delta_n = d_rr + r^{-1} d_r - (mn)^2 r^{-2} and convolution indices
running over [-N, N].  Discretization is second-order central differences
on the cell-centered grid r_i = (i + 1/2)h.  Cell centering keeps every
node away from r = 0 and makes the inner ghost node irrelevant: the ghost
coefficient 1/h^2 - 1/(2 h r_0) vanishes identically at r_0 = h/2, so the
parity reflection (u_n even about the origin for n = 0, odd for n >= 1)
costs nothing.  At the outer face the Dirichlet condition u(R_max) = 0 is
imposed through a cubic extrapolation ghost (u_K = -u_{K-3}/5 + u_{K-2}
- 3u_{K-1}); the simpler midpoint reflection -u_{K-1} leaves an O(1)
truncation u''(R)/4 in the boundary row that caps the observable order.

The Jacobian splits into a block-diagonal part (one 2(N+1) x 2(N+1) dense
block per node: linear matrices, the mode-diagonal Laplacian entries, and
the quadratic/cubic derivative couplings) plus two scalar off-diagonal
bands from the radial stencil, assembled sparse and factored directly.
Newton damps by step halving on the smooth merit sqrt(sum res^2); when
even the shortest step is uphill (stiff saddle-dominated landscapes near
depinning), the iteration falls back to Levenberg-style matrix damping
(J^T J + lam diag scaling) until ordinary Newton steps start working
again.  The residual history is reported so a quadratic tail can be
asserted downstream.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.sparse import bsr_matrix, diags
from scipy.sparse.linalg import splu

from .errors import (
    DimensionMismatch,
    DomainError,
    NoConvergence,
    SingularJacobian,
)
from .profiles import ProfileContext, radial_amplitude
from .rdsys import RDSystem


@dataclass(frozen=True)
class GalerkinGrid:
    """Cell-centered radial grid for m-dihedral modes 0..n_modes-1.

    R_max is normalized to an integer number of cells; pick h = R_max/K
    exactly when the boundary must sit on a prescribed radius (for example
    a Bessel zero in the linear-kernel tests).
    """

    m: int
    n_modes: int
    R_max: float = 100.0
    h: float = 0.05
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.m < 1 or self.n_modes < 1:
            raise DomainError(f"need m >= 1 and n_modes >= 1, got {self.m}, {self.n_modes}")
        if self.h <= 0.0 or self.R_max <= 0.0:
            raise DomainError(f"need positive h and R_max, got h={self.h}, R_max={self.R_max}")
        K = int(round(self.R_max / self.h))
        if K < 4:
            raise DomainError(f"grid needs at least 4 cells, got {K}")
        object.__setattr__(self, "R_max", K * self.h)
        object.__setattr__(self, "nodes", (np.arange(K) + 0.5) * self.h)

    @property
    def n_cells(self) -> int:
        return self.nodes.size


@dataclass
class GalerkinState:
    """Mode amplitudes on the grid, u[node, mode, component], at one mu."""

    u: np.ndarray
    mu: float
    residual_norm: float = np.nan


def _check_state(grid: GalerkinGrid, state: GalerkinState) -> np.ndarray:
    u = np.asarray(state.u, dtype=float)
    want = (grid.n_cells, grid.n_modes, 2)
    if u.shape != want:
        raise DimensionMismatch(f"state shape {u.shape} does not match grid {want}")
    return u


def _warn_short_tail(grid: GalerkinGrid, mu: float) -> None:
    need = 4.0 / np.sqrt(mu)
    if grid.R_max < need:
        warnings.warn(
            f"R_max={grid.R_max:g} is below 4/sqrt(mu)={need:.3g}; the far tail "
            "has not decayed inside the domain",
            stacklevel=3,
        )


def _pair_counts(N: int) -> list[Counter]:
    """Multiplicities of unordered (|i|, |j|) with i + j = n, indices in [-N, N]."""
    out = [Counter() for _ in range(N + 1)]
    for i in range(-N, N + 1):
        for j in range(-N, N + 1):
            n = i + j
            if 0 <= n <= N:
                key = tuple(sorted((abs(i), abs(j))))
                out[n][key] += 1
    return out


def _triple_counts(N: int) -> list[Counter]:
    """Multiplicities of sorted (|i|, |j|, |k|) with i + j + k = n."""
    out = [Counter() for _ in range(N + 1)]
    for i in range(-N, N + 1):
        for j in range(-N, N + 1):
            for k in range(-N, N + 1):
                n = i + j + k
                if 0 <= n <= N:
                    key = tuple(sorted((abs(i), abs(j), abs(k))))
                    out[n][key] += 1
    return out


def _laplacian_coeffs(grid: GalerkinGrid):
    r = grid.nodes
    h = grid.h
    sup = 1.0 / h**2 + 1.0 / (2.0 * h * r)
    sub = 1.0 / h**2 - 1.0 / (2.0 * h * r)
    return sup, sub


def residual(sys: RDSystem, grid: GalerkinGrid, state: GalerkinState) -> np.ndarray:
    """Steady-state defect per node/mode/component, shape (K, n_modes, 2)."""
    u = _check_state(grid, state)
    K, P = grid.n_cells, grid.n_modes
    N = P - 1
    r = grid.nodes
    h = grid.h
    sup, sub = _laplacian_coeffs(grid)
    mn2 = (grid.m * np.arange(P)) ** 2

    lap = (-2.0 / h**2 - mn2[None, :] / (r**2)[:, None])[:, :, None] * u
    lap[:-1] += sup[:-1, None, None] * u[1:]
    lap[1:] += sub[1:, None, None] * u[:-1]
    # Dirichlet ghost through the face zero at R_max, cubic so the boundary
    # row keeps the O(h^2) truncation of the interior (the midpoint
    # reflection -u_{K-1} leaves an O(1) u''(R)/4 defect there)
    lap[-1] += sup[-1] * (-u[-3] / 5.0 + u[-2] - 3.0 * u[-1])
    # inner ghost: coefficient sub[0] = 0 exactly on the cell-centered grid

    res = lap - u @ sys.M1.T - state.mu * (u @ sys.M2.T)
    for n, counts in enumerate(_pair_counts(N)):
        for (p, q), c in counts.items():
            res[:, n, :] -= c * np.einsum("ars,kr,ks->ka", sys.Q, u[:, p, :], u[:, q, :])
    for n, counts in enumerate(_triple_counts(N)):
        for (p, q, s), c in counts.items():
            res[:, n, :] -= c * np.einsum(
                "arst,kr,ks,kt->ka", sys.C, u[:, p, :], u[:, q, :], u[:, s, :]
            )
    return res


def _jacobian(sys: RDSystem, grid: GalerkinGrid, state: GalerkinState):
    """Sparse Jacobian of the residual at the current state, CSC-factored-ready."""
    u = _check_state(grid, state)
    K, P = grid.n_cells, grid.n_modes
    N = P - 1
    B = 2 * P
    r = grid.nodes
    h = grid.h
    sup, sub = _laplacian_coeffs(grid)
    mn2 = (grid.m * np.arange(P)) ** 2

    blocks = np.zeros((K, P, 2, P, 2))
    eye2 = np.eye(2)
    diag_lap = -2.0 / h**2 - mn2[None, :] / (r**2)[:, None]  # (K, P)
    for n in range(P):
        blocks[:, n, :, n, :] += diag_lap[:, n, None, None] * eye2
        blocks[:, n, :, n, :] -= sys.M1 + state.mu * sys.M2
        blocks[-1, n, :, n, :] -= 3.0 * sup[-1] * eye2  # cubic Dirichlet ghost

    for n, counts in enumerate(_pair_counts(N)):
        for (p, q), c in counts.items():
            blocks[:, n, :, p, :] -= c * np.einsum("abr,kr->kab", sys.Q, u[:, q, :])
            blocks[:, n, :, q, :] -= c * np.einsum("arb,kr->kab", sys.Q, u[:, p, :])
    for n, counts in enumerate(_triple_counts(N)):
        for (p, q, s), c in counts.items():
            blocks[:, n, :, p, :] -= c * np.einsum(
                "abrt,kr,kt->kab", sys.C, u[:, q, :], u[:, s, :]
            )
            blocks[:, n, :, q, :] -= c * np.einsum(
                "arbt,kr,kt->kab", sys.C, u[:, p, :], u[:, s, :]
            )
            blocks[:, n, :, s, :] -= c * np.einsum(
                "artb,kr,kt->kab", sys.C, u[:, p, :], u[:, q, :]
            )

    J = bsr_matrix(
        (blocks.reshape(K, B, B), np.arange(K), np.arange(K + 1)),
        shape=(K * B, K * B),
    )
    # radial stencil bands, plus the two extra couplings the cubic outer
    # ghost adds on the last node row (to nodes K-2 and K-3)
    off = diags(
        [np.repeat(sup[:-1], B), np.repeat(sub[1:], B)],
        offsets=[B, -B],
        shape=(K * B, K * B),
    ).tolil()
    for t in range(B):
        row = (K - 1) * B + t
        off[row, row - B] = off[row, row - B] + sup[-1]
        off[row, row - 2 * B] = off[row, row - 2 * B] - sup[-1] / 5.0
    return (J + off.tocsc()).tocsc()


@dataclass(frozen=True)
class NewtonReport:
    iterations: int
    residual_history: tuple
    correction_rel: float

    def quadratic_tail(self, floor: float = 1e-13) -> bool:
        """Superlinear contraction over the final informative pair of steps."""
        hist = [x for x in self.residual_history if x > floor]
        if len(hist) < 3:
            return len(self.residual_history) >= 2
        r1, r2, r3 = hist[-3:]
        if not (r3 < r2 < r1):
            return False
        order = np.log(r3 / r2) / np.log(r2 / r1)
        return order >= 1.5


def newton_refine(
    sys: RDSystem,
    grid: GalerkinGrid,
    seed: GalerkinState,
    tol: float = 1e-9,
    max_iter: int = 40,
) -> tuple[GalerkinState, NewtonReport]:
    """Damped Newton on the Galerkin residual; converged when ||res||_inf <= tol.

    Ordinary iterations solve J delta = -res and backtrack on the smooth
    2-norm merit (convergence itself is declared on the inf-norm the
    contract specifies).  If backtracking cannot find a downhill step, the
    iteration switches to Levenberg damping, (J^T J + lam D) delta =
    -J^T res with D = diag(J^T J), which always yields descent for lam
    large enough; lam is then relaxed by thirds after each accepted step
    so the scheme re-enters the ordinary Newton regime (and its quadratic
    tail) once the stiff region is crossed.

    The initial damping scales with the seed quality: a seed whose RMS
    residual is already small (a continuation corrector step, a resampled
    converged state) starts at lam = 0 and stays quadratic throughout,
    while a rough asymptotic seed starts with lam = O(1), which behaves
    like a cautious descent and avoids the wild first jump an undamped
    Newton step takes on these stiff depinning landscapes.
    """
    _warn_short_tail(grid, seed.mu)
    u0 = _check_state(grid, seed).copy()
    u = u0.copy()
    state = GalerkinState(u=u, mu=seed.mu)
    res = residual(sys, grid, state)
    rn = float(np.max(np.abs(res)))
    r2 = float(np.linalg.norm(res))
    history = [rn]
    # 0 = ordinary Newton; > 0 = Levenberg damping active
    rms = r2 / np.sqrt(res.size)
    lam = 0.0 if rms < 1e-4 else min(1.0, float(rms))

    iterations = 0
    while rn > tol:
        if iterations >= max_iter:
            raise NoConvergence(
                f"Newton stalled at ||res||_inf={rn:.3e} after {max_iter} iterations"
            )
        J = _jacobian(sys, grid, state).tocsc()
        accepted = False
        if lam == 0.0:
            try:
                lu = splu(J)
            except RuntimeError as exc:
                raise SingularJacobian(str(exc)) from exc
            delta = lu.solve(-res.ravel()).reshape(u.shape)
            if not np.all(np.isfinite(delta)):
                raise SingularJacobian("linear solve produced non-finite correction")
            alpha = 1.0
            while alpha >= 1.0 / 256.0:
                trial = GalerkinState(u=u + alpha * delta, mu=seed.mu)
                res_try = residual(sys, grid, trial)
                r2_try = float(np.linalg.norm(res_try))
                if r2_try <= (1.0 - 1e-4 * alpha) * r2:
                    u, state, res = trial.u, trial, res_try
                    rn = float(np.max(np.abs(res_try)))
                    r2 = r2_try
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                lam = 1e-4
        if not accepted:
            g = J.T @ res.ravel()
            H = (J.T @ J).tocsc()
            dH = diags(H.diagonal(), format="csc")
            for _ in range(40):
                try:
                    delta = splu((H + lam * dH).tocsc()).solve(-g)
                except RuntimeError as exc:
                    raise SingularJacobian(str(exc)) from exc
                trial = GalerkinState(u=u + delta.reshape(u.shape), mu=seed.mu)
                res_try = residual(sys, grid, trial)
                r2_try = float(np.linalg.norm(res_try))
                if r2_try < r2:
                    u, state, res = trial.u, trial, res_try
                    rn = float(np.max(np.abs(res_try)))
                    r2 = r2_try
                    accepted = True
                    lam /= 3.0
                    if lam < 1e-12:
                        lam = 0.0
                    break
                lam *= 6.0
                if lam > 1e14:
                    break
            if not accepted:
                raise NoConvergence(
                    f"damped step rejected at ||res||_inf={rn:.3e}"
                )
        history.append(rn)
        iterations += 1

    seed_norm = float(np.linalg.norm(u0))
    corr = float(np.linalg.norm(u - u0))
    correction_rel = corr / seed_norm if seed_norm > 0.0 else 0.0
    out = GalerkinState(u=u, mu=seed.mu, residual_norm=rn)
    return out, NewtonReport(
        iterations=iterations,
        residual_history=tuple(history),
        correction_rel=correction_rel,
    )


def l2_norm(grid: GalerkinGrid, state) -> float:
    """Planar L2 norm of the cosine truncation from its radial amplitudes.

    Integrating |u|^2 over the disc with the orthogonality of cos(m n theta)
    gives weights 2*pi on mode 0 and 4*pi on each n >= 1 (the factor 2 in
    the expansion squares to 4, the cosine average halves it).  The radial
    integral uses the midpoint rule, which the cell-centered nodes make
    exact for constants: sum r_i h = R^2/2.
    """
    u = state.u if isinstance(state, GalerkinState) else np.asarray(state, dtype=float)
    if u.shape[0] != grid.n_cells or u.shape[2] != 2:
        raise DimensionMismatch(f"state shape {u.shape} does not match grid")
    w = np.full(u.shape[1], 4.0 * np.pi)
    w[0] = 2.0 * np.pi
    e = np.sum(u * u, axis=2)  # (K, P)
    radial = grid.h * (grid.nodes[:, None] * e).sum(axis=0)  # (P,)
    return float(np.sqrt(np.dot(w, radial)))


def profile_to_state(ctx: ProfileContext, grid: GalerkinGrid, *, blend: bool = False) -> GalerkinState:
    """Sample the piecewise radial amplitudes onto the grid as a Newton seed."""
    if grid.m != ctx.m or grid.n_modes != ctx.N + 1:
        raise DimensionMismatch(
            f"grid carries (m={grid.m}, n_modes={grid.n_modes}), "
            f"context wants (m={ctx.m}, n_modes={ctx.N + 1})"
        )
    _warn_short_tail(grid, ctx.mu)
    u = np.empty((grid.n_cells, grid.n_modes, 2))
    for n in range(ctx.N + 1):
        u[:, n, :] = radial_amplitude(ctx, n, grid.nodes, blend=blend)
    return GalerkinState(u=u, mu=ctx.mu)


@dataclass(frozen=True)
class BranchPoint:
    mu: float
    l2: float
    converged: bool


@dataclass(frozen=True)
class BranchResult:
    points: tuple
    states: tuple
    fold_bracket: Optional[tuple] = None

    def slope(self) -> float:
        """Log-log slope of l2 vs mu over the converged, nonzero points."""
        mus = [p.mu for p in self.points if p.converged and p.l2 > 0.0]
        l2s = [p.l2 for p in self.points if p.converged and p.l2 > 0.0]
        if len(mus) < 2:
            raise DomainError("branch has fewer than 2 usable points for a slope fit")
        return float(np.polyfit(np.log(mus), np.log(l2s), 1)[0])


def continue_mu(
    sys: RDSystem,
    grid: GalerkinGrid,
    start: GalerkinState,
    mu_stop: float,
    steps: int,
    tol: float = 1e-9,
) -> BranchResult:
    """Natural-parameter continuation from start.mu to mu_stop in `steps` steps.

    Secant predictor, Newton corrector.  Corrector failure after the first
    step halts the branch and reports the fold bracket (last good mu,
    failed mu); failure on the very first step raises NoConvergence.
    """
    if steps < 1:
        raise DomainError(f"need at least 1 step, got {steps}")
    if mu_stop <= 0.0:
        raise DomainError(f"mu_stop must stay positive, got {mu_stop}")
    current, report = newton_refine(sys, grid, start, tol=tol)
    points = [BranchPoint(mu=current.mu, l2=l2_norm(grid, current), converged=True)]
    states = [current]
    schedule = np.linspace(start.mu, mu_stop, steps + 1)[1:]
    previous = None
    for k, mu_next in enumerate(schedule):
        if previous is not None and current.mu != previous.mu:
            frac = (mu_next - current.mu) / (current.mu - previous.mu)
            u_pred = current.u + frac * (current.u - previous.u)
        else:
            u_pred = current.u
        seed = GalerkinState(u=u_pred.copy(), mu=float(mu_next))
        try:
            refined, _ = newton_refine(sys, grid, seed, tol=tol)
        except (NoConvergence, SingularJacobian):
            if k == 0:
                raise
            return BranchResult(
                points=tuple(points + [BranchPoint(float(mu_next), np.nan, False)]),
                states=tuple(states),
                fold_bracket=(current.mu, float(mu_next)),
            )
        previous, current = current, refined
        points.append(BranchPoint(mu=current.mu, l2=l2_norm(grid, current), converged=True))
        states.append(current)
    return BranchResult(points=tuple(points), states=tuple(states))


def write_branch(path, branch: BranchResult) -> None:
    """Branch table CSV: mu,l2_norm,converged rows."""
    lines = ["mu,l2_norm,converged"]
    for p in branch.points:
        lines.append(f"{float(p.mu)!r},{float(p.l2)!r},{int(p.converged)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def save_state(path, grid: GalerkinGrid, state: GalerkinState) -> None:
    """Snapshot CSV: header with grid data, then r,mode,comp0,comp1 rows."""
    u = _check_state(grid, state)
    lines = [
        f"# m={grid.m} n_modes={grid.n_modes} R_max={float(grid.R_max)!r} "
        f"h={float(grid.h)!r} mu={float(state.mu)!r}"
    ]
    for i in range(grid.n_cells):
        for n in range(grid.n_modes):
            lines.append(
                f"{float(grid.nodes[i])!r},{n},{float(u[i, n, 0])!r},{float(u[i, n, 1])!r}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_state(path) -> tuple[GalerkinGrid, GalerkinState]:
    """Inverse of save_state."""
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    k, v = tok.split("=", 1)
                    meta[k] = v
            else:
                r, n, c0, c1 = line.split(",")
                rows.append((float(r), int(n), float(c0), float(c1)))
    grid = GalerkinGrid(
        m=int(meta["m"]),
        n_modes=int(meta["n_modes"]),
        R_max=float(meta["R_max"]),
        h=float(meta["h"]),
    )
    u = np.zeros((grid.n_cells, grid.n_modes, 2))
    if len(rows) != grid.n_cells * grid.n_modes:
        raise DimensionMismatch(
            f"snapshot holds {len(rows)} rows, grid wants {grid.n_cells * grid.n_modes}"
        )
    idx = 0
    for i in range(grid.n_cells):
        for n in range(grid.n_modes):
            _, n_read, c0, c1 = rows[idx]
            if n_read != n:
                raise DimensionMismatch("snapshot rows out of order")
            u[i, n, 0] = c0
            u[i, n, 1] = c1
            idx += 1
    return grid, GalerkinState(u=u, mu=float(meta["mu"]))
