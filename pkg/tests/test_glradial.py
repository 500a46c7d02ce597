"""Tests for the radial amplitude-equation homoclinic solver.

No authoritative numeric value of q0 or q_plus exists to compare
against, so the oracle is the solver run at two different integrator
resolutions plus the exact scaling law
q0(c0, c3) = (c0/|c3|)^(1/2) c0^(1/4) q0(1, -1), which follows from
substituting q(s) = sqrt(c0/|c3|) Q(sqrt(c0) s) into the equation.
Frozen digits below come from such cross-checked runs.
"""

import numpy as np
import pytest

from turingrings.errors import (
    ClassificationAmbiguous,
    DomainError,
    Supercritical,
)
from turingrings.glradial import (
    CROSSES_ZERO,
    GROWS_POSITIVE,
    LINGERS,
    evaluate,
    find_homoclinic,
    shoot,
)

Q0_CANONICAL = 2.1798581264  # cross-checked at two resolutions


@pytest.fixture(scope="module")
def hom11():
    return find_homoclinic(1.0, -1.0)


class TestShoot:
    def test_exit_classes_bracket_the_homoclinic(self, hom11):
        q0 = hom11.q0
        for frac in (1e-4, 0.5, 0.99):
            assert shoot(1.0, -1.0, frac * q0, 30.0).classification == LINGERS
        for frac in (1.01, 2.0):
            assert shoot(1.0, -1.0, frac * q0, 30.0).classification == CROSSES_ZERO

    def test_supercritical_sign_blows_up(self):
        assert shoot(1.0, 1.0, 0.5, 30.0).classification == GROWS_POSITIVE

    def test_trajectory_starts_on_series(self):
        res = shoot(1.0, -1.0, 1.0, 5.0)
        assert res.s[0] == pytest.approx(1e-3)
        assert res.q[0] == pytest.approx(np.sqrt(1e-3), rel=1e-5)
        # dq = q' + q/(2s) ~ q0/sqrt(s) at the left end
        assert res.dq[0] == pytest.approx(1.0 / np.sqrt(1e-3), rel=1e-4)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            shoot(-1.0, -1.0, 0.5, 30.0)
        with pytest.raises(DomainError):
            shoot(1.0, -1.0, 0.0, 30.0)


class TestFindHomoclinic:
    def test_frozen_amplitude(self, hom11):
        assert hom11.q0 == pytest.approx(Q0_CANONICAL, abs=5e-8)

    def test_positive_single_hump(self, hom11):
        assert np.all(hom11.q_samples > 0.0)
        peak = np.argmax(hom11.q_samples)
        s_peak = hom11.s_grid[peak]
        assert 0.1 < s_peak < hom11.s_grid[-1] - 1.0
        # single hump: q is increasing before and decreasing after
        assert np.all(np.diff(hom11.q_samples[:peak]) > 0)
        assert np.all(np.diff(hom11.q_samples[peak + 1:]) < 0)

    def test_tail_slope_matches_decay_rate(self, hom11):
        assert abs(hom11.tail_slope + 1.0) < 0.01
        assert hom11.q_plus > 0.0

    def test_two_resolution_stability(self, hom11):
        finer = find_homoclinic(1.0, -1.0, rtol=5e-11, atol=5e-13,
                                bvp_tol=5e-11, s_max=60.0)
        assert abs(finer.q0 - hom11.q0) < 1e-6

    def test_scaling_covariance(self, hom11):
        for c0, c3 in ((0.25, -1.95222), (4.0, -0.5)):
            direct = find_homoclinic(c0, c3)
            predicted = np.sqrt(c0 / abs(c3)) * c0 ** 0.25 * hom11.q0
            assert abs(direct.q0 / predicted - 1.0) < 1e-8

    def test_supercritical_rejected(self):
        with pytest.raises(Supercritical):
            find_homoclinic(1.0, 1.0)
        with pytest.raises(Supercritical):
            find_homoclinic(1.0, 0.0)

    def test_no_bracket_is_ambiguous(self):
        # a window this short ends every shot before the hump resolves,
        # so no zero-crossing class exists and bracketing must fail
        with pytest.raises(ClassificationAmbiguous):
            find_homoclinic(1.0, -1.0, s_max=0.5)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            find_homoclinic(0.0, -1.0)


class TestEvaluate:
    def test_seam_at_s_min(self, hom11):
        s = hom11.s_grid[0]
        c0, c3, q0 = hom11.c0, hom11.c3, hom11.q0
        series = (q0 * (np.sqrt(s) + (c0 / 6.0) * s ** 2.5)
                  + (c3 * q0 ** 3 / 12.0) * s ** 3.5)
        q, _ = evaluate(hom11, s)
        assert abs(q - series) / abs(series) < 1e-8

    def test_seam_at_s_max(self, hom11):
        s = hom11.s_grid[-1]
        q, dq = evaluate(hom11, s)
        q_out, dq_out = evaluate(hom11, s + 1e-9)
        # jump beyond the function's own variation over 1e-9
        assert abs(q_out - q) / abs(q) < 1e-8
        assert abs(dq_out - dq) / abs(dq) < 1e-8
        assert dq == pytest.approx(-np.sqrt(hom11.c0) * q, rel=1e-10)
        # the reported window-fit amplitude agrees with the endpoint to
        # within the exponentially small correction it absorbs
        tail = hom11.q_plus / np.sqrt(s) * np.exp(-np.sqrt(hom11.c0) * s)
        assert abs(q - tail) / abs(q) < 1e-6

    def test_small_s_ratio(self, hom11):
        q, _ = evaluate(hom11, 1e-4)
        assert abs(q / np.sqrt(1e-4) / hom11.q0 - 1.0) < 1e-6

    def test_interior_matches_samples(self, hom11):
        idx = [10, 700, 2000, 3500]
        q, dq = evaluate(hom11, hom11.s_grid[idx])
        np.testing.assert_allclose(q, hom11.q_samples[idx], rtol=1e-12)
        np.testing.assert_allclose(dq, hom11.dq_samples[idx], rtol=1e-12)

    def test_tail_log_slope_one_percent(self, hom11):
        s = 0.8 * hom11.s_grid[-1]
        h = 1e-5
        qm, _ = evaluate(hom11, s - h)
        qp, _ = evaluate(hom11, s + h)
        slope = (np.log(qp * np.sqrt(s + h)) - np.log(qm * np.sqrt(s - h))) / (2 * h)
        assert abs(slope + np.sqrt(hom11.c0)) < 0.01 * np.sqrt(hom11.c0)

    def test_fd_residual_on_samples(self, hom11):
        s, q = hom11.s_grid, hom11.q_samples
        h = s[1] - s[0]
        i = np.arange(2, len(s) - 2)
        d1 = (q[i - 2] - 8 * q[i - 1] + 8 * q[i + 1] - q[i + 2]) / (12 * h)
        d2 = (-q[i - 2] + 16 * q[i - 1] - 30 * q[i]
              + 16 * q[i + 1] - q[i + 2]) / (12 * h * h)
        res = (d2 + d1 / s[i] - q[i] / (4 * s[i] ** 2)
               - hom11.c0 * q[i] - hom11.c3 * q[i] ** 3)
        interior = (s[i] > 0.5) & (s[i] < 0.8 * s[-1])
        assert np.abs(res[interior]).max() <= 1e-6 * np.abs(q).max()

    def test_rejects_nonpositive_s(self, hom11):
        with pytest.raises(DomainError):
            evaluate(hom11, 0.0)
        with pytest.raises(DomainError):
            evaluate(hom11, np.array([1.0, -2.0]))
