"""Tests for the continuum matching equation and large-N convergence.

The Riemann-correspondence oracle below codes the even-order discrete
matching map as a raw triple sum (no shared code with the package's
convolution-based implementation): after the (n/N, N a_n) rescaling the
discrete map must approach the continuum integral operator at rate O(1/N).
"""

import numpy as np
import pytest

from turingrings.continuum import (
    ContinuumSolution,
    compare_large_N,
    continuum_apply,
    positive_branch,
    solve_continuum,
    write_comparison,
    write_solution,
)
from turingrings.errors import DimensionMismatch, DomainError
from turingrings.matching import MatchProblem, cubic_map


@pytest.fixture(scope="module")
def sol128():
    return solve_continuum(128)


@pytest.fixture(scope="module")
def branch():
    return {N: positive_branch(N) for N in (20, 40, 80)}


def brute_even_map(a: np.ndarray) -> np.ndarray:
    """a_n -> sum_{i+j+k=n, |i|,|j|,|k|<=N} a_|i| a_|j| a_|k|, by enumeration."""
    N = len(a) - 1
    idx = np.arange(-N, N + 1)
    I, J = np.meshgrid(idx, idx, indexing="ij")
    out = np.empty(N + 1)
    for n in range(N + 1):
        K = n - I - J
        ok = np.abs(K) <= N
        out[n] = np.sum(
            a[np.abs(I)[ok]] * a[np.abs(J)[ok]] * a[np.abs(np.where(ok, K, 0))[ok]]
        )
    return out


class TestApply:
    def test_zero_maps_to_zero(self):
        assert np.all(continuum_apply(np.zeros(16), 16) == 0.0)

    def test_cubic_homogeneity(self):
        rng = np.random.default_rng(11)
        alpha = rng.uniform(-1.0, 1.0, 32)
        lhs = continuum_apply(1.7 * alpha, 32)
        rhs = 1.7**3 * continuum_apply(alpha, 32)
        assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(rhs))

    def test_guards(self):
        with pytest.raises(DimensionMismatch):
            continuum_apply(np.zeros(7), 7)
        with pytest.raises(DimensionMismatch):
            continuum_apply(np.zeros(10), 16)

    def test_riemann_correspondence(self, sol128):
        """The rescaled discrete map approaches the integral operator."""
        devs = []
        for N in (100, 200):
            tn = np.arange(N + 1) / N
            al = np.interp(tn, sol128.t_grid, sol128.alpha)
            disc = N * brute_even_map(al / N)
            cont = continuum_apply(al, N + 1)
            devs.append(np.max(np.abs(disc - cont)) / np.max(np.abs(cont)))
        assert devs[0] < 0.01
        assert devs[1] < 0.6 * devs[0]  # measured: 6.7e-3 -> 3.4e-3

    def test_brute_oracle_agrees_with_package_map(self):
        # ties the hand enumeration to the tested convolution coding
        rng = np.random.default_rng(5)
        a = rng.uniform(-0.5, 0.5, 13)
        got = cubic_map(MatchProblem(2, 12), a)
        assert np.allclose(got, brute_even_map(a), rtol=1e-13, atol=1e-14)


class TestPositiveBranch:
    def test_matches_published_base(self):
        a4 = positive_branch(4)
        assert np.allclose(a4, [0.153, 0.150, 0.140, 0.125, 0.105], atol=5e-4)

    def test_solves_matching_equation(self, branch):
        for N, a in branch.items():
            res = a - cubic_map(MatchProblem(2, N), a)
            assert np.max(np.abs(res)) <= 1e-12

    def test_positivity_along_family(self, branch):
        for a in branch.values():
            assert np.all(a > 0.0)

    def test_rescaled_endpoint_stabilizes(self, branch):
        # N a_N approaches alpha(1) ~ 0.4266; already settled by N = 40
        e40 = 40.0 * branch[40][-1]
        e80 = 80.0 * branch[80][-1]
        assert abs(e80 - 0.4266) < 2e-3
        assert abs(e80 - e40) < 1e-4

    def test_guard(self):
        with pytest.raises(DomainError):
            positive_branch(3)


class TestSolveContinuum:
    def test_converges_positive(self, sol128):
        assert sol128.residual_norm <= 1e-9
        assert np.all(sol128.alpha > 0.0)
        assert sol128.t_grid[0] == 0.0
        assert sol128.t_grid[-1] == 1.0
        # well away from the trivial root
        assert sol128.alpha.min() > 0.3
        assert abs(sol128.alpha[0] - 0.6920) < 1e-3

    def test_fixed_point_property(self, sol128):
        back = continuum_apply(sol128.alpha, 128)
        assert np.max(np.abs(back - sol128.alpha)) <= 1e-9

    def test_grid_refinement_second_order(self, sol128):
        s32 = solve_continuum(32)
        s64 = solve_continuum(64)
        t = sol128.t_grid
        d32 = np.max(np.abs(np.interp(t, s32.t_grid, s32.alpha) - sol128.alpha))
        d64 = np.max(np.abs(np.interp(t, s64.t_grid, s64.alpha) - sol128.alpha))
        # consecutive-difference ratio for O(h^2) on 31/63/127 intervals
        assert 2.5 < d32 / d64 < 6.5

    def test_guard(self):
        with pytest.raises(DomainError):
            solve_continuum(16)


class TestCompareLargeN:
    def test_distances_shrink_along_family(self, branch, sol128):
        table = compare_large_N(
            [(N, branch[N]) for N in (20, 40, 80)], continuum=sol128
        )
        d = {(n1, n2): dist for n1, n2, dist in table.pairs}
        assert d[(20, 40)] > d[(40, 80)]
        assert d[(20, 80)] > d[(40, 80)]
        to_c = dict(table.to_continuum)
        assert to_c[80] < to_c[20]
        # measured: d(20,c)=0.0172, halving at each doubling
        assert to_c[20] == pytest.approx(0.0172, abs=2e-3)
        assert to_c[80] == pytest.approx(0.0043, abs=1e-3)

    def test_identical_inputs_distance_zero(self, branch, sol128):
        table = compare_large_N(
            [(20, branch[20]), (20, branch[20])], continuum=sol128
        )
        assert table.pairs[0][2] == 0.0

    def test_guards(self, branch, sol128):
        with pytest.raises(DimensionMismatch):
            compare_large_N([(20, branch[20])], continuum=sol128)
        with pytest.raises(DimensionMismatch):
            compare_large_N(
                [(20, branch[20]), (40, branch[20])], continuum=sol128
            )


class TestArtifacts:
    def test_solution_csv_round_trip(self, sol128, tmp_path):
        path = tmp_path / "alpha.csv"
        write_solution(path, sol128)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "t,alpha"
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.array_equal(data[:, 0], sol128.t_grid)
        assert np.array_equal(data[:, 1], sol128.alpha)

    def test_comparison_csv(self, branch, sol128, tmp_path):
        table = compare_large_N(
            [(20, branch[20]), (40, branch[40])], continuum=sol128
        )
        path = tmp_path / "conv.csv"
        write_comparison(path, table)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "N1,N2,sup_distance"
        assert lines[1].startswith("20,40,")
        assert lines[2].startswith("20,continuum,")
        assert lines[3].startswith("40,continuum,")
