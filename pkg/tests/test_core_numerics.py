"""Core numeric kernel tests.

Special-function implementations are checked against scipy.special as an
independent oracle wherever scipy has the function, and against classical
identities (recurrences, functional equations, closed-form values) where it
does not.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_hermite, hyp2f1, iv
from scipy.special import zeta as scipy_zeta

from stochlab.core_numerics import (
    DomainError,
    NumericError,
    QuadratureRule,
    RngStream,
    bessel_i,
    det_and_solve,
    gauss_2f1,
    heat_kernel,
    hermite,
    theta3,
    xi_moment_function,
    xi_reference,
    zeta_dirichlet,
)


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(123, 5).normals(1000)
        b = RngStream(123, 5).normals(1000)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(123, 5).uniforms(100)
        b = RngStream(123, 6).uniforms(100)
        c = RngStream(124, 5).uniforms(100)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_substream_deterministic_and_distinct(self):
        root = RngStream(9, 0)
        kids = [root.substream(i) for i in range(4)]
        again = [RngStream(9, 0).substream(i) for i in range(4)]
        for k, g in zip(kids, again):
            assert np.array_equal(k.uniforms(10), g.uniforms(10))
        ids = {k.stream_id for k in kids}
        assert len(ids) == 4

    def test_uniforms_strictly_inside_unit_interval(self):
        u = RngStream(1, 1).uniforms(200000)
        assert u.min() > 0.0 and u.max() < 1.0

    def test_normal_moments(self):
        z = RngStream(2024, 0).normals(400000)
        assert abs(z.mean()) < 0.01
        assert abs(z.std() - 1.0) < 0.01

    def test_choice_index_frequencies(self):
        s = RngStream(5, 5)
        cum = np.cumsum([0.2, 0.3, 0.5])
        counts = np.zeros(3)
        for _ in range(3000):
            counts[s.choice_index(cum)] += 1
        assert np.all(np.abs(counts / 3000 - [0.2, 0.3, 0.5]) < 0.03)


class TestQuadrature:
    def test_gauss_legendre_polynomial_exactness(self):
        rule = QuadratureRule.gauss_legendre(-1.0, 2.0, order=8)
        # degree 15 polynomial integrated exactly by an 8-point rule
        val = rule.integrate(lambda x: 7.0 * x**15 - x**4 + 2.0)
        exact = 7.0 * (2.0**16 - 1.0) / 16.0 - (2.0**5 + 1.0) / 5.0 + 6.0
        assert abs(val - exact) < 1e-10 * abs(exact)

    def test_composite_matches_single_panel(self):
        f = lambda x: np.exp(-(x**2))
        a = QuadratureRule.gauss_legendre(0.0, 3.0).integrate(f)
        b = QuadratureRule.composite_gauss_legendre([0.0, 1.0, 2.5, 3.0]).integrate(f)
        assert abs(a - b) < 1e-14

    def test_gauss_hermite_normal_moments(self):
        rule = QuadratureRule.gauss_hermite(order=32, loc=1.5, scale=2.0)
        assert abs(rule.integrate(lambda w: w) - 1.5) < 1e-12
        assert abs(rule.integrate(lambda w: (w - 1.5) ** 2) - 4.0) < 1e-11
        assert abs(rule.integrate(lambda w: (w - 1.5) ** 4) - 48.0) < 1e-9

    def test_contour_residues(self):
        rule = QuadratureRule.trapezoid_contour(0.5 + 0.0j, 2.0, n=128)
        assert abs(rule.integrate(lambda z: 1.0 / (z - 0.3)) - 1.0) < 1e-12
        assert abs(rule.integrate(lambda z: 3.0 / (z + 0.9 + 0.5j)) - 3.0) < 1e-12
        # analytic integrand and pole outside the circle both give zero
        assert abs(rule.integrate(lambda z: z**2 + 1.0)) < 1e-12
        assert abs(rule.integrate(lambda z: 1.0 / (z - 5.0))) < 1e-12

    def test_bad_inputs(self):
        with pytest.raises(DomainError):
            QuadratureRule.gauss_legendre(1.0, 1.0)
        with pytest.raises(DomainError):
            QuadratureRule.composite_gauss_legendre([0.0])
        with pytest.raises(DomainError):
            QuadratureRule.trapezoid_contour(0.0, -1.0)


class TestHeatKernel:
    def test_normalization_and_symmetry(self):
        rule = QuadratureRule.gauss_legendre(-12.0, 12.0, order=200)
        total = rule.integrate(lambda y: heat_kernel(1.7, 0.3, y))
        assert abs(total - 1.0) < 1e-13
        assert heat_kernel(0.7, 0.2, 1.1) == heat_kernel(0.7, 1.1, 0.2)

    def test_complex_continuation(self):
        t, y = 0.9, 1.3
        val = heat_kernel(t, 0.0, 1j * y)
        expect = math.exp(y * y / (2 * t)) / math.sqrt(2 * math.pi * t)
        assert abs(val - expect) < 1e-13 * expect

    def test_rejects_bad_time(self):
        for t in (0.0, -1.0):
            with pytest.raises(DomainError):
                heat_kernel(t, 0.0, 1.0)


class TestBesselI:
    def test_against_scipy_grid(self):
        zs = np.concatenate([[0.0], np.logspace(-3, 2, 40)])
        for nu in (-0.5, 0.0, 0.5, 1.0, 1.7, 3.0):
            ours = bessel_i(nu, zs, scaled=True)
            ref = iv(nu, zs) * np.exp(-zs)
            assert np.allclose(ours, ref, rtol=5e-14, atol=1e-300)

    def test_scaled_unscaled_consistency(self):
        for z in (0.5, 10.0, 29.0, 31.0, 100.0):
            assert bessel_i(0.5, z, scaled=True) == pytest.approx(
                bessel_i(0.5, z) * math.exp(-z), rel=1e-13
            )

    def test_half_order_closed_form(self):
        # I_{1/2}(z) = sqrt(2/(pi z)) sinh z
        for z in (0.3, 2.0, 8.0):
            assert bessel_i(0.5, z) == pytest.approx(
                math.sqrt(2.0 / (math.pi * z)) * math.sinh(z), rel=1e-13
            )

    @given(st.floats(0.05, 25.0), st.floats(0.05, 3.0))
    @settings(max_examples=60, deadline=None)
    def test_three_term_recurrence(self, z, nu):
        # I_{nu-1}(z) - I_{nu+1}(z) = (2 nu / z) I_nu(z)
        lhs = bessel_i(nu - 1.0, z) - bessel_i(nu + 1.0, z)
        rhs = 2.0 * nu / z * bessel_i(nu, z)
        assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            bessel_i(-1.0, 1.0)
        with pytest.raises(DomainError):
            bessel_i(0.5, -0.1)


class TestGauss2F1:
    def test_against_scipy_grid(self):
        for a in (0.3, 1.2, 2.0):
            for b in (0.5, 1.5):
                for c in (1.9, 3.1):
                    for z in (-0.8, -0.2, 0.1, 0.5, 0.9):
                        assert gauss_2f1(a, b, c, z) == pytest.approx(
                            float(hyp2f1(a, b, c, z)), rel=2e-12
                        )

    def test_elementary_identity(self):
        # 2F1(a, b; b; z) = (1-z)^(-a)
        assert gauss_2f1(0.7, 1.3, 1.3, 0.6) == pytest.approx(0.4 ** (-0.7), rel=1e-13)

    def test_terminating_polynomial(self):
        # 2F1(-2, b; c; z) = 1 - 2bz/c + b(b+1)z^2/(c(c+1))
        b, c, z = 0.9, 1.4, 0.97
        expect = 1.0 - 2.0 * b * z / c + b * (b + 1.0) * z * z / (c * (c + 1.0))
        assert gauss_2f1(-2.0, b, c, z) == pytest.approx(expect, rel=1e-14)

    def test_domain_and_budget(self):
        with pytest.raises(DomainError):
            gauss_2f1(0.5, 0.5, 1.5, 1.0)
        with pytest.raises(NumericError):
            gauss_2f1(0.5, 0.5, 1.5, 0.999999, max_terms=50)


class TestHermite:
    def test_against_scipy(self):
        xs = np.linspace(-3.0, 3.0, 13)
        for n in range(0, 26):
            ref = eval_hermite(n, xs)
            ours = hermite(n, xs)
            assert np.allclose(ours, ref, rtol=1e-10, atol=1e-8)

    @given(st.integers(1, 20), st.floats(-4.0, 4.0))
    @settings(max_examples=80, deadline=None)
    def test_recurrence(self, n, x):
        lhs = hermite(n + 1, x)
        rhs = 2.0 * x * hermite(n, x) - 2.0 * n * hermite(n - 1, x)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-7)

    def test_domain(self):
        with pytest.raises(DomainError):
            hermite(-1, 0.0)


class TestTheta3:
    @staticmethod
    def _brute(v, tau, n=300):
        ns = np.arange(-n, n + 1)
        return complex(np.sum(np.exp(1j * math.pi * tau * ns**2 + 2j * math.pi * ns * v)))

    def test_against_brute_force(self):
        for v, tau in [(0.0, 1j), (0.3, 0.5 + 0.7j), (0.1 - 0.2j, 2j), (1.7 + 0.9j, 0.35j)]:
            assert theta3(v, tau) == pytest.approx(self._brute(v, tau), rel=1e-13, abs=1e-15)

    def test_periodicity(self):
        v, tau = 0.234 + 0.1j, 0.8j
        assert theta3(v + 1.0, tau) == pytest.approx(theta3(v, tau), rel=1e-13)

    def test_quasi_periodicity(self):
        v, tau = 0.1 + 0.05j, 0.9j
        lhs = theta3(v + tau, tau)
        rhs = np.exp(-1j * math.pi * tau - 2j * math.pi * v) * theta3(v, tau)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_modular_inversion(self):
        # theta3(0, iu) = theta3(0, i/u) / sqrt(u)
        for u in (0.3, 1.0, 2.7):
            lhs = theta3(0.0, 1j * u).real
            rhs = theta3(0.0, 1j / u).real / math.sqrt(u)
            assert lhs == pytest.approx(rhs, rel=1e-13)

    def test_domain(self):
        with pytest.raises(DomainError):
            theta3(0.0, 0.5 + 1e-4j)
        with pytest.raises(NumericError):
            theta3(100000.0j, 0.002j)


class TestZetaAndXi:
    def test_even_zeta_values(self):
        assert zeta_dirichlet(2.0) == pytest.approx(math.pi**2 / 6.0, rel=1e-13)
        assert zeta_dirichlet(4.0) == pytest.approx(math.pi**4 / 90.0, rel=1e-14)

    def test_against_scipy(self):
        for s in (1.5, 2.5, 3.7, 11.0):
            assert zeta_dirichlet(s) == pytest.approx(float(scipy_zeta(s)), rel=1e-9)

    def test_xi_pinned_values(self):
        assert xi_moment_function(2.0) == pytest.approx(math.pi / 6.0, abs=1e-12)
        assert xi_moment_function(1.0) == pytest.approx(0.5, abs=1e-12)
        assert xi_reference(4.0) == pytest.approx(math.pi**2 / 15.0, rel=1e-12)

    def test_xi_functional_symmetry(self):
        # the theta-integral form is manifestly symmetric under s -> 1-s
        for s in (0.3, 0.6, 0.9):
            assert xi_moment_function(s) == pytest.approx(xi_moment_function(1.0 - s), rel=1e-12)

    def test_xi_cross_check_runs_for_large_s(self):
        # internal product-form comparison must pass silently
        assert xi_moment_function(6.0) == pytest.approx(xi_reference(6.0), rel=1e-10)

    def test_domain(self):
        with pytest.raises(DomainError):
            zeta_dirichlet(1.0)
        with pytest.raises(DomainError):
            xi_moment_function(0.0)


class TestDetAndSolve:
    def test_det_only(self):
        d, x = det_and_solve(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert d == pytest.approx(-2.0, rel=1e-14)
        assert x is None

    def test_singular_det_is_zero(self):
        d, _ = det_and_solve(np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert d == 0.0

    def test_solve_roundtrip(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(6, 6)) + 6.0 * np.eye(6)
        b = rng.normal(size=6)
        _, x = det_and_solve(a, b)
        assert np.allclose(a @ x, b, atol=1e-12)

    def test_singular_solve_raises(self):
        with pytest.raises(NumericError):
            det_and_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 0.0]))

    def test_nonsquare_rejected(self):
        with pytest.raises(DomainError):
            det_and_solve(np.ones((2, 3)))
