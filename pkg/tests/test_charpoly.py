"""Tests for GUE sampling and characteristic-polynomial averages."""

import math

import numpy as np
import pytest
from scipy import stats

from stochlab.charpoly import (
    GueSpec,
    gue_matrices,
    ishikawa_check,
    ishikawa_random_trials,
    mgue_det,
    mgue_det_block,
    mgue_mc,
    sample_gue,
    sample_gue_batch,
    timeshift_equivalence_check,
)
from stochlab.core_numerics import DomainError, QuadratureRule, RngStream
from stochlab.dyson import WeylPoint


class TestGueSpec:
    def test_validation(self):
        with pytest.raises(DomainError):
            GueSpec(0, 1.0)
        with pytest.raises(DomainError):
            GueSpec(2, 0.0)
        with pytest.raises(DomainError):
            GueSpec(2, -1.0)


class TestSampleGue:
    def test_matrices_are_hermitian_with_real_diagonal(self):
        mats = gue_matrices(GueSpec(3, 0.7), 10, RngStream(1, 0))
        np.testing.assert_allclose(mats, np.conj(np.swapaxes(mats, 1, 2)))
        assert np.all(np.abs(np.imag(np.diagonal(mats, axis1=1, axis2=2))) == 0.0)

    def test_entry_variances(self):
        mats = gue_matrices(GueSpec(2, 0.5), 50000, RngStream(2, 0))
        assert np.var(mats[:, 0, 0].real) == pytest.approx(0.5, rel=0.05)
        assert np.var(mats[:, 0, 1].real) == pytest.approx(0.25, rel=0.05)
        assert np.var(mats[:, 0, 1].imag) == pytest.approx(0.25, rel=0.05)

    def test_single_site_is_plain_normal(self):
        lam = sample_gue_batch(GueSpec(1, 0.8), 50000, RngStream(3, 0))
        v = np.var(lam[:, 0])
        se = 0.8 * math.sqrt(2.0 / 50000)
        assert abs(v - 0.8) < 4.0 * se

    def test_single_draw_is_sorted_weyl_point(self):
        w = sample_gue(GueSpec(3, 1.0), RngStream(4, 0))
        assert isinstance(w, WeylPoint)
        assert np.all(np.diff(w.coordinates) >= 0.0)

    def test_trace_is_symmetric(self):
        lam = sample_gue_batch(GueSpec(2, 1.0), 100000, RngStream(5, 0))
        s = lam.sum(axis=1)
        assert abs(np.mean(s)) < 4.0 * np.std(s) / math.sqrt(s.size)

    def test_squared_gap_matches_quadrature(self):
        # E[(l2 - l1)^2] from the eigenvalue density by 2-d quadrature
        gh = QuadratureRule.gauss_hermite(32)
        x, y = np.meshgrid(gh.nodes, gh.nodes, indexing="ij")
        w = np.outer(gh.weights, gh.weights)
        gap_sq = (y - x) ** 2
        target = 0.5 * float(np.sum(w * gap_sq * gap_sq))
        lam = sample_gue_batch(GueSpec(2, 1.0), 200000, RngStream(6, 0))
        g2 = (lam[:, 1] - lam[:, 0]) ** 2
        se = np.std(g2) / math.sqrt(g2.size)
        assert target == pytest.approx(6.0, rel=1e-10)
        assert abs(np.mean(g2) - target) < 4.0 * se

    def test_single_point_density_histogram(self):
        # marginal of one uniformly picked eigenvalue, expected bin mass
        # from quadrature of the normalized two-point density
        gh = QuadratureRule.gauss_hermite(32)

        def marginal(x):
            inner = float(np.dot(gh.weights, (gh.nodes - x) ** 2))
            return math.exp(-0.5 * x * x) * inner / (2.0 * math.sqrt(2.0 * math.pi))

        edges = np.linspace(-3.0, 3.0, 11)
        probs = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            rule = QuadratureRule.gauss_legendre(lo, hi, 24)
            probs.append(float(np.dot(rule.weights, [marginal(v) for v in rule.nodes])))
        rng = RngStream(7, 0)
        lam = sample_gue_batch(GueSpec(2, 1.0), 50000, rng)
        pick = lam[np.arange(lam.shape[0]), (rng.uniforms(lam.shape[0]) < 0.5).astype(int)]
        inside = pick[(pick >= -3.0) & (pick <= 3.0)]
        counts, _ = np.histogram(inside, bins=edges)
        expected = np.array(probs) * counts.sum() / sum(probs)
        assert stats.chisquare(counts, expected).pvalue > 1e-3

    def test_validation(self):
        with pytest.raises(DomainError):
            gue_matrices(GueSpec(2, 1.0), 0, RngStream(1, 0))
        with pytest.raises(DomainError):
            sample_gue_batch(GueSpec(2, 1.0), 0, RngStream(1, 0))


class TestMgueMc:
    def test_single_point_single_site_is_alpha(self):
        est = mgue_mc([0.37], GueSpec(1, 1.0), 20000, RngStream(11, 0))
        assert abs(est.value - 0.37) < 4.0 * est.stderr
        assert est.n_samples == 20000

    def test_two_points_single_site(self):
        a, b = 0.6, -1.1
        est = mgue_mc([a, b], GueSpec(1, 0.9), 50000, RngStream(12, 0))
        assert abs(est.value - (a * b + 0.9)) < 4.0 * est.stderr

    def test_complex_points_supported(self):
        est = mgue_mc([0.5 + 0.5j], GueSpec(1, 1.0), 20000, RngStream(13, 0))
        assert abs(est.value - (0.5 + 0.5j)) < 4.0 * est.stderr

    def test_matches_closed_form(self):
        spec = GueSpec(2, 1.0)
        alpha = [0.5, -0.9]
        est = mgue_mc(alpha, spec, 200000, RngStream(14, 0))
        assert abs(est.value - mgue_det(alpha, spec)) < 3.0 * est.stderr

    def test_validation(self):
        with pytest.raises(DomainError):
            mgue_mc([], GueSpec(1, 1.0), 10, RngStream(1, 0))
        with pytest.raises(DomainError):
            mgue_mc([1.0], GueSpec(1, 1.0), 0, RngStream(1, 0))


class TestMgueDet:
    def test_single_site_pair_closed_form(self):
        for var in (1.0, 0.7, 2.5):
            v = mgue_det([0.8, -1.3], GueSpec(1, var))
            assert v.real == pytest.approx(0.8 * -1.3 + var, rel=1e-12)
            assert v.imag == pytest.approx(0.0, abs=1e-12)

    def test_flat_and_block_forms_agree(self):
        rng = RngStream(2024, 0)
        for size in (1, 2, 3):
            for half in (1, 2):
                for _ in range(3):
                    d = rng.normals((2, 2 * half))
                    alpha = d[0] + 1j * d[1]
                    spec = GueSpec(size, 0.8)
                    v1, v2 = mgue_det(alpha, spec), mgue_det_block(alpha, spec)
                    assert abs(v1 - v2) <= 1e-10 * max(1.0, abs(v1))

    def test_symmetric_under_permutation(self):
        spec = GueSpec(2, 1.2)
        alpha = np.array([0.4 + 0.1j, -0.7, 1.9 - 0.3j, 0.2j])
        base = mgue_det(alpha, spec)
        assert mgue_det(alpha[[2, 0, 3, 1]], spec) == pytest.approx(base, rel=1e-10)

    def test_block_prefactor_stays_finite_at_large_size(self):
        v = mgue_det_block([0.3, -0.4], GueSpec(40, 1.0))
        assert np.isfinite(abs(v))
        w = mgue_det([0.3, -0.4], GueSpec(40, 1.0))
        assert abs(v - w) <= 1e-8 * abs(w)

    def test_validation(self):
        with pytest.raises(DomainError):
            mgue_det([1.0], GueSpec(1, 1.0))
        with pytest.raises(DomainError):
            mgue_det([1.0, 1.0], GueSpec(1, 1.0))
        with pytest.raises(DomainError):
            mgue_det_block([1.0, 2.0, 3.0], GueSpec(1, 1.0))


class TestIshikawa:
    def test_random_instances(self):
        assert ishikawa_random_trials(2, 20, RngStream(5, 0)) < 1e-10
        assert ishikawa_random_trials(3, 20, RngStream(5, 1)) < 1e-10

    def test_constant_columns_collapse_left_side(self):
        # a = b = 1 zeroes every inner 2x2 block, so the left determinant
        # vanishes and the identity holds trivially
        x = np.array([0.3, 1.7])
        y = np.array([-0.4, 2.2])
        ones = np.ones(2)
        lhs = np.linalg.det((ones[None, :] - ones[:, None]) / (y[None, :] - x[:, None]))
        assert lhs == 0.0
        assert ishikawa_check(x, y, ones, ones) < 1e-14

    def test_cauchy_degeneration(self):
        x = np.array([0.3, 1.7])
        y = np.array([-0.4, 2.2])
        lhs = np.linalg.det(1.0 / (y[None, :] - x[:, None]))
        hx, hy = x[1] - x[0], y[1] - y[0]
        cauchy = -hx * hy / np.prod(y[None, :] - x[:, None])
        assert lhs == pytest.approx(cauchy, rel=1e-12)
        assert ishikawa_check(x, y, np.zeros(2), np.ones(2)) < 1e-12

    def test_validation(self):
        with pytest.raises(DomainError):
            ishikawa_check([1.0], [1.0], [0.0], [1.0])
        with pytest.raises(DomainError):
            ishikawa_check([1.0, 2.0], [1.0], [0.0], [1.0])
        with pytest.raises(DomainError):
            ishikawa_random_trials(0, 5, RngStream(1, 0))


class TestTimeshift:
    def test_single_site_matches_shifted_normal(self):
        r = timeshift_equivalence_check(
            GueSpec(1, 1.0), 0.5, 20000, RngStream(61, 0), dt=2e-3)
        assert r["passed"]
        assert r["max_statistic"] < r["critical_value"]

    def test_two_site_example(self):
        r = timeshift_equivalence_check(
            GueSpec(2, 0.5), 0.5, 20000, RngStream(61, 1), dt=2e-3)
        assert r["passed"]
        assert len(r["single_time_statistics"]) == 2
        assert r["two_time_points"] == (0.5, 1.0)

    def test_report_discloses_partial_scope(self):
        r = timeshift_equivalence_check(
            GueSpec(1, 1.0), 0.25, 5000, RngStream(61, 2), dt=5e-3)
        assert "not exercised" in r["scope"]
        assert "finite-dimensional" in r["scope"]

    def test_pair_functional_is_optional(self):
        r = timeshift_equivalence_check(
            GueSpec(1, 1.0), 0.25, 5000, RngStream(61, 3), dt=5e-3, two_time=False)
        assert "two_time_statistic" not in r
        assert r["passed"]

    def test_validation(self):
        with pytest.raises(DomainError):
            timeshift_equivalence_check(GueSpec(1, 1.0), 0.0, 5000, RngStream(1, 0))
        with pytest.raises(DomainError):
            timeshift_equivalence_check(GueSpec(1, 1.0), 0.5, 50, RngStream(1, 0))
