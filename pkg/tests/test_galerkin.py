"""Tests for the radial Galerkin discretization, refinement, continuation.

The linear-kernel order test uses an internal oracle: J_2(r) times the
eigenvector of M1 for eigenvalue -1 solves (Delta_2 - M1)u = 0 exactly in
the continuum (Bessel's equation at unit wavenumber), so with the
nonlinear tensors zeroed and mu = 0 the discrete residual is pure
truncation error.  Placing R_max on a zero of J_2 makes the Dirichlet
face condition exact as well.
"""

import warnings

import numpy as np
import pytest

from turingrings.errors import DimensionMismatch, DomainError, NoConvergence
from turingrings.galerkin import (
    BranchPoint,
    BranchResult,
    GalerkinGrid,
    GalerkinState,
    NewtonReport,
    continue_mu,
    l2_norm,
    load_state,
    newton_refine,
    profile_to_state,
    residual,
    save_state,
    write_branch,
)
from turingrings.galerkin import _jacobian, _pair_counts, _triple_counts
from turingrings.glradial import find_homoclinic
from turingrings.profiles import build_context, radial_amplitude
from turingrings.rdsys import RDSystem, coefficients, sh_system

# region-ordering and short-tail warnings fire routinely at desk-scale mu;
# both have dedicated tests
pytestmark = pytest.mark.filterwarnings(
    "ignore:far boundary", "ignore:R_max"
)

RHOMBIC = np.array([0.0, 1.0 / np.sqrt(3.0)])

# 30th positive zero of J_2, located by bisection on the package Bessel
# evaluator (criterion-level zero finding is covered in the specfun tests)
J2_ZERO = 96.58456144778322


@pytest.fixture(scope="module")
def sh():
    sys = sh_system(1.6)
    coeffs = coefficients(sys)
    gl = find_homoclinic(coeffs.c0, coeffs.c3)
    return sys, coeffs, gl


@pytest.fixture(scope="module")
def grid():
    return GalerkinGrid(m=2, n_modes=2, R_max=100.0, h=0.05)


def seed_state(sh, grid, mu, r0=None, blend=False):
    sys, coeffs, gl = sh
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ctx = build_context(sys, m=2, N=1, a=RHOMBIC, mu=mu, r0=r0, gl=gl)
        u = np.empty((grid.n_cells, grid.n_modes, 2))
        for n in range(grid.n_modes):
            u[:, n, :] = radial_amplitude(ctx, n, grid.nodes, blend=blend)
    return GalerkinState(u=u, mu=mu)


@pytest.fixture(scope="module")
def ring(sh, grid):
    """Converged localized ring at mu = 0.005 (the workhorse solution)."""
    sys, _, _ = sh
    seed = seed_state(sh, grid, 0.005, r0=36.0, blend=True)
    out, report = newton_refine(sys, grid, seed, max_iter=150)
    return out, report


class TestGrid:
    def test_cell_centering(self):
        g = GalerkinGrid(m=2, n_modes=2, R_max=10.0, h=0.5)
        assert g.n_cells == 20
        assert g.nodes[0] == 0.25
        assert np.allclose(np.diff(g.nodes), 0.5)
        assert g.nodes[-1] == pytest.approx(10.0 - 0.25)

    def test_R_max_normalized_to_cells(self):
        g = GalerkinGrid(m=2, n_modes=2, R_max=1.03, h=0.25)
        assert g.R_max == pytest.approx(1.0)

    def test_guards(self):
        with pytest.raises(DomainError):
            GalerkinGrid(m=0, n_modes=2)
        with pytest.raises(DomainError):
            GalerkinGrid(m=2, n_modes=0)
        with pytest.raises(DomainError):
            GalerkinGrid(m=2, n_modes=2, R_max=0.1, h=0.05)
        with pytest.raises(DomainError):
            GalerkinGrid(m=2, n_modes=2, R_max=10.0, h=-0.1)

    def test_short_tail_warning(self, sh):
        sys, _, _ = sh
        g = GalerkinGrid(m=2, n_modes=2, R_max=10.0, h=0.05)
        z = GalerkinState(u=np.zeros((g.n_cells, 2, 2)), mu=0.01)
        with pytest.warns(UserWarning, match="R_max"):
            newton_refine(sys, g, z)


class TestConvolutionCounts:
    """Mode-coupling multiplicities against brute-force enumeration."""

    def test_pair_counts_N1_by_hand(self):
        counts = _pair_counts(1)
        # n = 0: (0,0); (1,-1) and (-1,1) both fold to key (1,1)
        assert counts[0] == {(0, 0): 1, (1, 1): 2}
        # n = 1: (0,1) and (1,0) fold to (0,1)
        assert counts[1] == {(0, 1): 2}

    @pytest.mark.parametrize("N", [1, 2, 4])
    def test_totals_match_lattice_counts(self, N):
        pairs = _pair_counts(N)
        triples = _triple_counts(N)
        for n in range(N + 1):
            want_pairs = sum(
                1
                for i in range(-N, N + 1)
                for j in range(-N, N + 1)
                if i + j == n
            )
            want_triples = sum(
                1
                for i in range(-N, N + 1)
                for j in range(-N, N + 1)
                for k in range(-N, N + 1)
                if i + j + k == n
            )
            assert sum(pairs[n].values()) == want_pairs
            assert sum(triples[n].values()) == want_triples


class TestResidual:
    def test_zero_state_exactly_zero(self, sh, grid):
        sys, _, _ = sh
        st = GalerkinState(u=np.zeros((grid.n_cells, 2, 2)), mu=0.05)
        assert np.all(residual(sys, grid, st) == 0.0)

    def test_dimension_guard(self, sh, grid):
        sys, _, _ = sh
        st = GalerkinState(u=np.zeros((7, 2, 2)), mu=0.05)
        with pytest.raises(DimensionMismatch):
            residual(sys, grid, st)

    def test_bessel_kernel_second_order(self, sh):
        """Linear residual on the exact continuum kernel decays as O(h^2)."""
        sys, _, _ = sh
        linear = RDSystem(
            M1=sys.M1, M2=sys.M2, Q=np.zeros((2, 2, 2)), C=np.zeros((2, 2, 2, 2))
        )
        # eigenvector of M1 for eigenvalue -1 (Jordan structure makes it
        # unique up to scale; for the SH cast it is (1, 0))
        w, v = np.linalg.eig(sys.M1)
        vec = np.real(v[:, np.argmin(np.abs(w + 1.0))])
        from turingrings.specfun import j_table

        norms = []
        for k in (1932, 3864, 7728):
            g = GalerkinGrid(m=2, n_modes=2, R_max=J2_ZERO, h=J2_ZERO / k)
            u = np.zeros((g.n_cells, 2, 2))
            u[:, 1, :] = j_table(g.nodes, 2)[2][:, None] * vec[None, :]
            res = residual(linear, g, GalerkinState(u=u, mu=0.0))
            norms.append(float(np.max(np.abs(res))))
        r1 = norms[0] / norms[1]
        r2 = norms[1] / norms[2]
        assert abs(r1 - 4.0) < 0.5
        assert abs(r2 - 4.0) < 0.5

    def test_seed_residual_shrinks_with_mu(self, sh, grid):
        """Theorem remainder trend: smaller mu, smaller defect (L2)."""
        sys, _, _ = sh
        res_02 = residual(sys, grid, seed_state(sh, grid, 0.02))
        res_08 = residual(sys, grid, seed_state(sh, grid, 0.08))
        assert np.linalg.norm(res_02) < np.linalg.norm(res_08)


class TestJacobian:
    @pytest.mark.parametrize("m,P", [(2, 2), (3, 3)])
    def test_matches_finite_differences(self, sh, m, P):
        sys, _, _ = sh
        rng = np.random.default_rng(7)
        g = GalerkinGrid(m=m, n_modes=P, R_max=4.0, h=0.05)
        u = 0.3 * rng.standard_normal((g.n_cells, P, 2))
        st = GalerkinState(u=u, mu=0.05)
        J = _jacobian(sys, g, st).tocsr()
        v = rng.standard_normal(u.shape)
        eps = 1e-6
        fd = (
            residual(sys, g, GalerkinState(u=u + eps * v, mu=0.05))
            - residual(sys, g, GalerkinState(u=u - eps * v, mu=0.05))
        ) / (2.0 * eps)
        jv = (J @ v.ravel()).reshape(u.shape)
        assert np.max(np.abs(fd - jv)) < 1e-8 * max(1.0, np.max(np.abs(jv)))


class TestNewtonRefine:
    def test_converges_from_asymptotic_seed(self, grid, ring):
        out, report = ring
        assert out.residual_norm <= 1e-9
        assert report.correction_rel < 0.5
        assert report.quadratic_tail()
        # the refined profile is a genuine ring: peak away from the origin,
        # at the Ginzburg-Landau hump radius (about 1.77 / sqrt(mu))
        peak = grid.nodes[int(np.argmax(np.abs(out.u[:, 1, 0])))]
        assert 15.0 < peak < 35.0
        assert l2_norm(grid, out) == pytest.approx(5.9365, rel=1e-3)

    def test_exact_seed_takes_zero_iterations(self, sh, grid, ring):
        sys, _, _ = sh
        out, _ = ring
        again, report = newton_refine(sys, grid, out)
        assert report.iterations == 0
        assert report.correction_rel == 0.0

    def test_zero_seed_is_fixed_point(self, sh, grid):
        sys, _, _ = sh
        z = GalerkinState(u=np.zeros((grid.n_cells, 2, 2)), mu=0.05)
        out, report = newton_refine(sys, grid, z)
        assert report.iterations == 0
        assert l2_norm(grid, out) == 0.0

    def test_perturbed_solution_snaps_back_quadratically(self, sh, grid, ring):
        # a smooth corrector-scale bump keeps the seed inside the pure
        # Newton regime (rough seeds deliberately start damped instead)
        sys, _, _ = sh
        out, _ = ring
        bump = np.zeros_like(out.u)
        bump[:, 1, 0] = 1e-4 * np.exp(-((grid.nodes - 24.0) ** 2) / 20.0)
        refined, report = newton_refine(sys, grid, GalerkinState(u=out.u + bump, mu=out.mu))
        assert report.iterations <= 3
        assert report.quadratic_tail()
        assert np.linalg.norm(refined.u - out.u) < 1e-8 * np.linalg.norm(out.u)

    def test_report_bookkeeping(self, ring):
        _, report = ring
        assert len(report.residual_history) == report.iterations + 1
        assert report.residual_history[-1] <= 1e-9

    def test_stall_raises_no_convergence(self, sh, grid):
        # max_iter=2 cannot absorb an O(1) correction
        sys, _, _ = sh
        seed = seed_state(sh, grid, 0.005, r0=36.0, blend=True)
        with pytest.raises(NoConvergence):
            newton_refine(sys, grid, seed, max_iter=2)


class TestQuadraticTail:
    def mk(self, hist):
        return NewtonReport(
            iterations=len(hist) - 1,
            residual_history=tuple(hist),
            correction_rel=0.1,
        )

    def test_quadratic_history_accepted(self):
        assert self.mk([1.0, 1e-1, 1e-2, 1e-4, 1e-8]).quadratic_tail()

    def test_linear_history_rejected(self):
        assert not self.mk([1.0, 0.5, 0.25, 0.125, 0.0625]).quadratic_tail()

    def test_nonmonotone_tail_rejected(self):
        assert not self.mk([1e-2, 1e-4, 2e-4, 1e-6]).quadratic_tail()

    def test_single_big_contraction_accepted(self):
        # one recorded step is too short to measure an order; treated as
        # converging fast rather than penalized
        assert self.mk([1e-3, 1e-7]).quadratic_tail()

    def test_zero_step_history_rejected(self):
        assert not self.mk([5e-10]).quadratic_tail()

    def test_floor_values_dropped(self):
        # entries at the noise floor carry no order information; with the
        # rest of the history too short to measure, the degenerate branch
        # applies
        assert self.mk([1e-2, 1e-15, 1e-16]).quadratic_tail()


class TestL2Norm:
    def test_zero(self, grid):
        assert l2_norm(grid, np.zeros((grid.n_cells, 2, 2))) == 0.0

    def test_unit_mode0_gives_disc_area_root(self, grid):
        u = np.zeros((grid.n_cells, 2, 2))
        u[:, 0, 0] = 1.0
        want = np.sqrt(np.pi * grid.R_max**2)
        assert l2_norm(grid, u) == pytest.approx(want, rel=1e-14)

    def test_matches_planar_quadrature(self):
        """Radial formula vs brute 2D integration of the cosine expansion."""
        g = GalerkinGrid(m=3, n_modes=2, R_max=15.0, h=0.05)
        u = np.zeros((g.n_cells, 2, 2))
        u[:, 0, 0] = 0.3 * np.exp(-((g.nodes - 4.0) ** 2))
        u[:, 1, 0] = np.exp(-((g.nodes - 5.0) ** 2) / 2.0)
        radial = l2_norm(g, u)

        xs = np.linspace(-15.0, 15.0, 1201)
        X, Y = np.meshgrid(xs, xs)
        R = np.hypot(X, Y)
        TH = np.arctan2(Y, X)
        f0 = np.interp(R.ravel(), g.nodes, u[:, 0, 0], right=0.0).reshape(R.shape)
        f1 = np.interp(R.ravel(), g.nodes, u[:, 1, 0], right=0.0).reshape(R.shape)
        field = f0 + 2.0 * f1 * np.cos(3.0 * TH)
        dA = (xs[1] - xs[0]) ** 2
        planar = np.sqrt(np.sum(field**2) * dA)
        assert radial == pytest.approx(planar, rel=0.01)

    def test_dimension_guard(self, grid):
        with pytest.raises(DimensionMismatch):
            l2_norm(grid, np.zeros((5, 2, 2)))


class TestProfileToState:
    def test_samples_radial_amplitudes(self, sh, grid):
        sys, _, gl = sh
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ctx = build_context(sys, m=2, N=1, a=RHOMBIC, mu=0.05, gl=gl)
            st = profile_to_state(ctx, grid)
            assert st.mu == 0.05
            assert st.u.shape == (grid.n_cells, 2, 2)
            want = radial_amplitude(ctx, 1, grid.nodes)
        assert np.array_equal(st.u[:, 1, :], want)

    def test_mode_count_guard(self, sh):
        sys, _, gl = sh
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ctx = build_context(sys, m=2, N=1, a=RHOMBIC, mu=0.05, gl=gl)
            bad = GalerkinGrid(m=2, n_modes=3, R_max=30.0, h=0.05)
            with pytest.raises(DimensionMismatch):
                profile_to_state(ctx, bad)
        bad_m = GalerkinGrid(m=3, n_modes=2, R_max=30.0, h=0.05)
        with pytest.raises(DimensionMismatch):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                profile_to_state(ctx, bad_m)


class TestContinuation:
    def test_zero_branch_stays_zero(self, sh, grid):
        sys, _, _ = sh
        z = GalerkinState(u=np.zeros((grid.n_cells, 2, 2)), mu=0.05)
        branch = continue_mu(sys, grid, z, mu_stop=0.02, steps=3)
        assert all(p.converged for p in branch.points)
        assert all(p.l2 == 0.0 for p in branch.points)
        assert branch.fold_bracket is None
        with pytest.raises(DomainError):
            branch.slope()

    def test_branch_down_from_ring(self, sh, grid, ring, tmp_path):
        sys, _, _ = sh
        out, _ = ring
        branch = continue_mu(sys, grid, out, mu_stop=0.0025, steps=5)
        assert branch.fold_bracket is None
        mus = [p.mu for p in branch.points]
        l2s = [p.l2 for p in branch.points]
        assert mus[0] == pytest.approx(0.005)
        assert mus[-1] == pytest.approx(0.0025)
        assert all(p.converged for p in branch.points)
        # the norm decreases with mu along the localized family; the
        # measured log-log slope here is about 0.10 (see the module notes
        # on L2-vs-amplitude scaling)
        assert all(a > b for a, b in zip(l2s, l2s[1:]))
        assert branch.slope() > 0.0

        path = tmp_path / "branch.csv"
        write_branch(path, branch)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "mu,l2_norm,converged"
        assert len(lines) == len(branch.points) + 1
        assert lines[1].endswith(",1")

    def test_domain_truncation_reports_bracket(self, sh, grid, ring):
        """Continuing below mu where 4/sqrt(mu) outgrows R_max halts cleanly.

        The corrector failure is reported as a bracket; the halt is a
        property of the truncated domain, not a true fold of the family.
        """
        sys, _, _ = sh
        out, _ = ring
        branch = continue_mu(sys, grid, out, mu_stop=0.0002, steps=6)
        assert branch.fold_bracket == (pytest.approx(0.0018), pytest.approx(0.001))
        assert not branch.points[-1].converged
        assert np.isnan(branch.points[-1].l2)
        # states only cover the converged prefix
        assert len(branch.states) == len(branch.points) - 1

    def test_first_step_failure_raises(self, sh, grid, ring):
        sys, _, _ = sh
        out, _ = ring
        # one giant step into the truncation-dominated regime fails its
        # very first corrector solve
        with pytest.raises(NoConvergence):
            continue_mu(sys, grid, out, mu_stop=0.0002, steps=1)

    def test_guards(self, sh, grid, ring):
        sys, _, _ = sh
        out, _ = ring
        with pytest.raises(DomainError):
            continue_mu(sys, grid, out, mu_stop=0.001, steps=0)
        with pytest.raises(DomainError):
            continue_mu(sys, grid, out, mu_stop=-0.01, steps=3)


class TestSnapshots:
    def test_round_trip(self, sh, grid, ring, tmp_path):
        out, _ = ring
        path = tmp_path / "state.csv"
        save_state(path, grid, out)
        grid2, state2 = load_state(path)
        assert grid2.m == grid.m
        assert grid2.n_modes == grid.n_modes
        assert grid2.R_max == grid.R_max
        assert grid2.h == grid.h
        assert state2.mu == out.mu
        assert np.array_equal(state2.u, out.u)

    def test_header_format(self, grid, tmp_path):
        st = GalerkinState(u=np.zeros((grid.n_cells, 2, 2)), mu=0.03)
        path = tmp_path / "zero.csv"
        save_state(path, grid, st)
        first = path.read_text().split("\n", 1)[0]
        assert first.startswith("# m=2 n_modes=2 R_max=100.0 h=0.05 mu=0.03")

    def test_row_count_guard(self, grid, tmp_path):
        st = GalerkinState(u=np.zeros((grid.n_cells, 2, 2)), mu=0.03)
        path = tmp_path / "trunc.csv"
        save_state(path, grid, st)
        lines = path.read_text().strip().split("\n")
        path.write_text("\n".join(lines[:-2]) + "\n")
        with pytest.raises(DimensionMismatch):
            load_state(path)
