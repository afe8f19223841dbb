import math

import numpy as np
import pytest
from scipy.stats import ks_2samp, kstest

from stochlab.bessel import BesselSpec, bessel_cdf
from stochlab.core_numerics import DomainError, QuadratureRule, RngStream, heat_kernel
from stochlab.dyson import (
    evolve_dyson_ensemble,
    HermitianBmState,
    PointConfiguration,
    WeylPoint,
    hciz_check,
    interpolation_weight,
    km_determinant,
    lattice_interpolation_partial,
    lattice_interpolation_weight,
    noncolliding_density,
    sample_eigenvalues,
    simulate_dyson,
    simulate_dyson_batch,
    simulate_hermitian_bm,
    vandermonde,
)


class TestTypes:
    def test_weyl_point_validation(self):
        WeylPoint([0.0])
        WeylPoint([-1.0, 1.0])
        with pytest.raises(DomainError):
            WeylPoint([1.0, 1.0])
        with pytest.raises(DomainError):
            WeylPoint([2.0, 1.0])
        with pytest.raises(DomainError):
            WeylPoint([])
        with pytest.raises(DomainError):
            WeylPoint([0.0, np.inf])

    def test_point_configuration(self):
        xi = PointConfiguration([1.0, -1.0, 1.0])
        assert np.array_equal(xi.points, [-1.0, 1.0, 1.0])
        support, mult = xi.multiplicities()
        assert np.array_equal(support, [-1.0, 1.0])
        assert np.array_equal(mult, [1, 2])
        assert not xi.is_simple
        assert xi.count_in(0.0, 2.0) == 2
        with pytest.raises(DomainError):
            xi.to_weyl()
        simple = PointConfiguration([3.0, -2.0])
        assert np.array_equal(simple.to_weyl().coordinates, [-2.0, 3.0])


class TestVandermonde:
    def test_known_values(self):
        assert vandermonde(WeylPoint([4.2])) == 1.0
        assert vandermonde(WeylPoint([0.0, 1.0, 2.0])) == 2.0
        assert vandermonde([1.0, 1.0, 3.0]) == 0.0

    def test_matches_determinant_form(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = np.sort(rng.normal(size=5))
            det = np.linalg.det(np.vander(x, increasing=True))
            assert abs(vandermonde(x) - det) < 1e-10 * max(1.0, abs(det))


class TestKmDeterminant:
    def test_single_point_is_heat_kernel(self):
        got = km_determinant(0.7, WeylPoint([0.2]), WeylPoint([1.1]))
        assert got == pytest.approx(heat_kernel(0.7, 0.2, 1.1), rel=1e-15)

    def test_diagonal_dominance_at_small_time(self):
        x = WeylPoint([-1.0, 1.0])
        assert km_determinant(0.1, x, x) > 0.0

    def test_antisymmetry_under_row_swap(self):
        a = km_determinant(0.3, [-1.0, 1.0], [0.2, 0.9])
        b = km_determinant(0.3, [-1.0, 1.0], [0.9, 0.2])
        assert a == pytest.approx(-b, rel=1e-14)

    def test_validation(self):
        with pytest.raises(DomainError):
            km_determinant(0.0, [0.0], [1.0])
        with pytest.raises(DomainError):
            km_determinant(1.0, [0.0, 1.0], [0.5])


class TestNoncollidingDensity:
    def test_single_point_reduces_to_heat_kernel(self):
        got = noncolliding_density(0.5, WeylPoint([0.0]), WeylPoint([0.3]))
        assert got == pytest.approx(heat_kernel(0.5, 0.0, 0.3), rel=1e-15)

    def test_wall_start_rejected_and_wall_target_is_null(self):
        with pytest.raises(DomainError):
            noncolliding_density(0.5, [1.0, 1.0], [0.0, 2.0])
        assert noncolliding_density(0.5, [-1.0, 1.0], [0.7, 0.7]) == 0.0

    def test_normalization_over_the_chamber(self):
        # rotated coordinates put the chamber wall on a panel boundary
        x = WeylPoint([-1.0, 1.0])
        t = 0.5
        u_x = 2.0 / math.sqrt(2.0)
        wing = 7.0 * math.sqrt(t)
        qv = QuadratureRule.composite_gauss_legendre(np.linspace(-wing, u_x + wing, 21), 12)
        qu = QuadratureRule.composite_gauss_legendre(np.linspace(0.0, u_x + wing, 21), 12)
        total = 0.0
        for uu, wu in zip(qu.nodes, qu.weights):
            acc = 0.0
            for vv, wv in zip(qv.nodes, qv.weights):
                y = np.array([(vv - uu), (vv + uu)]) / math.sqrt(2.0)
                acc += wv * noncolliding_density(t, x, y)
            total += wu * acc
        assert abs(total - 1.0) < 1e-6

    def test_backward_equation_residual_is_second_order(self):
        target = np.array([0.1, 1.3])

        def q(t, x1, x2):
            return noncolliding_density(t, np.array([x1, x2]), target)

        def residual(d):
            t0, x1, x2 = 0.7, -0.4, 0.6
            dt = (q(t0 + d, x1, x2) - q(t0 - d, x1, x2)) / (2 * d)
            lap = (
                q(t0, x1 + d, x2)
                - 2 * q(t0, x1, x2)
                + q(t0, x1 - d, x2)
                + q(t0, x1, x2 + d)
                - 2 * q(t0, x1, x2)
                + q(t0, x1, x2 - d)
            ) / d**2
            g1 = (q(t0, x1 + d, x2) - q(t0, x1 - d, x2)) / (2 * d)
            g2 = (q(t0, x1, x2 + d) - q(t0, x1, x2 - d)) / (2 * d)
            return dt - 0.5 * lap - g1 / (x1 - x2) - g2 / (x2 - x1)

        r1, r2 = residual(1e-2), residual(5e-3)
        assert abs(r1) < 1e-4
        assert r1 / r2 == pytest.approx(4.0, abs=0.5)


class TestSimulateDyson:
    def test_single_particle_is_plain_bm(self):
        path = simulate_dyson(2.0, WeylPoint([0.4]), 1e-3, 0.2, RngStream(51, 0))
        dw = RngStream(51, 0).normals((200, 1)) * math.sqrt(1e-3)
        recon = 0.4 + np.concatenate([[0.0], np.cumsum(dw[:, 0])])
        assert np.allclose(path.values[:, 0], recon, rtol=0.0, atol=1e-15)
        assert path.collision_time is None

    def test_paths_stay_ordered(self):
        path = simulate_dyson(2.0, WeylPoint([-1.0, 0.0, 1.0]), 1e-3, 1.0, RngStream(52, 0))
        assert np.all(np.diff(path.values, axis=1) > 0.0)
        assert path.collision_time is None

    def test_halving_exhaustion_reports_collision(self):
        from stochlab.dyson import HALVING_LEVELS, _dyson_step

        x = np.array([0.0, 1e-6])
        dw = np.array([0.0, -1.0])
        # dt so small the repulsion cannot rescue the violating proposal
        assert _dyson_step(x, dw, 1e-18, 2.0, depth=HALVING_LEVELS) is None
        batch = np.array([[0.0, 1e-6], [0.0, 1.0]])
        dwb = np.array([[0.0, -1.0], [0.0, 0.0]])
        out = _dyson_step(batch, dwb, 1e-18, 2.0, depth=HALVING_LEVELS)
        assert np.all(np.isnan(out[0]))
        assert np.allclose(out[1], [0.0, 1.0], atol=1e-12)

    def test_low_beta_survives_via_halving(self):
        # the deterministic dw/2 split lets the singular drift absorb
        # near-collisions, so beta < 1 runs stay ordered in practice
        out = simulate_dyson_batch(0.5, WeylPoint([-0.05, 0.05]), 1e-3, 1.0, RngStream(53, 0), 200)
        assert not out["collided"].any()
        assert np.all(np.isnan(out["collision_time"]))
        assert np.all(out["final"][:, 1] > out["final"][:, 0])

    def test_gap_reduces_to_three_dimensional_radial_law(self):
        out = simulate_dyson_batch(2.0, WeylPoint([-1.0, 1.0]), 1e-3, 1.0, RngStream(54, 0), 30000)
        gap = (out["final"][:, 1] - out["final"][:, 0]) / math.sqrt(2.0)
        spec = BesselSpec(3.0, 2.0 / math.sqrt(2.0))
        ks = kstest(gap, lambda q: bessel_cdf(spec, 1.0, q)).statistic
        assert ks < 0.015

    def test_center_of_mass_variance(self):
        out = simulate_dyson_batch(2.0, WeylPoint([-1.0, 1.0]), 1e-3, 1.0, RngStream(55, 0), 30000)
        com = out["final"].mean(axis=1)
        assert abs(com.var() - 0.5) < 0.02

    def test_validation(self):
        with pytest.raises(DomainError):
            simulate_dyson(0.0, WeylPoint([0.0]), 1e-3, 1.0, RngStream(1, 0))
        with pytest.raises(DomainError):
            simulate_dyson_batch(2.0, WeylPoint([0.0]), 1e-3, 1.0, RngStream(1, 0), 0)


class TestEvolveEnsemble:
    def test_tiled_start_reproduces_batch(self):
        start = WeylPoint([-1.0, 0.5])
        a = simulate_dyson_batch(2.0, start, 1e-3, 0.3, RngStream(77, 0), 40)
        tiled = np.tile(start.coordinates, (40, 1))
        b = evolve_dyson_ensemble(2.0, tiled, 1e-3, 0.3, RngStream(77, 0))
        np.testing.assert_array_equal(a["final"], b["final"])

    def test_distinct_starts_stay_ordered(self):
        rng = RngStream(78, 0)
        starts = np.sort(rng.normals((50, 3)), axis=1)
        out = evolve_dyson_ensemble(2.0, starts, 1e-3, 0.5, rng)
        assert np.all(np.diff(out["final"], axis=1) > 0.0)
        assert not out["collided"].any()

    def test_validation(self):
        with pytest.raises(DomainError):
            evolve_dyson_ensemble(2.0, np.zeros((0, 2)), 1e-3, 1.0, RngStream(1, 0))
        with pytest.raises(DomainError):
            evolve_dyson_ensemble(2.0, np.array([[1.0, 0.0]]), 1e-3, 1.0, RngStream(1, 0))
        with pytest.raises(DomainError):
            evolve_dyson_ensemble(0.0, np.array([[0.0, 1.0]]), 1e-3, 1.0, RngStream(1, 0))


class TestHermitianBm:
    def test_single_entry_is_diagonal_bm(self):
        state = HermitianBmState.initial(WeylPoint([0.7]))
        out = simulate_hermitian_bm(state, 1e-3, 0.1, RngStream(61, 0))
        dw = RngStream(61, 0).normals((100, 1, 1)) * math.sqrt(1e-3)
        recon = 0.7 + np.concatenate([[0.0], np.cumsum(dw[:, 0, 0])])
        assert np.allclose(out["eigenvalues"][:, 0], recon, rtol=0.0, atol=1e-12)

    def test_trace_identity(self):
        state = HermitianBmState.initial(WeylPoint([-1.0, 0.3, 2.0]))
        out = simulate_hermitian_bm(state, 1e-3, 0.5, RngStream(62, 0))
        resid = np.max(np.abs(out["eigenvalues"].sum(axis=1) - out["diagonal_sum"]))
        assert resid < 1e-12
        assert np.all(np.diff(out["eigenvalues"], axis=1) >= 0.0)

    def test_state_is_not_mutated_and_final_state_advances(self):
        state = HermitianBmState.initial(WeylPoint([-1.0, 1.0]))
        out = simulate_hermitian_bm(state, 1e-2, 0.1, RngStream(63, 0))
        assert np.all(state.drivers == 0.0)
        assert out["final_state"].time == pytest.approx(0.1)
        assert not np.all(out["final_state"].drivers == 0.0)

    def test_pathwise_marginal_matches_exact_sampler(self):
        x = WeylPoint([-1.0, 1.0])
        exact = sample_eigenvalues(x, 1.0, RngStream(64, 0), 20000)
        out = simulate_dyson_batch(2.0, x, 1e-3, 1.0, RngStream(65, 0), 20000)
        for i in range(2):
            assert ks_2samp(exact[:, i], out["final"][:, i]).pvalue > 1e-3


class TestSampleEigenvalues:
    def test_first_two_spectral_moments(self):
        x = WeylPoint([-1.0, 0.5, 2.0])
        t = 0.8
        ev = sample_eigenvalues(x, t, RngStream(71, 0), 40000)
        s1 = ev.sum(axis=1)
        s2 = (ev**2).sum(axis=1)
        assert abs(s1.mean() - x.coordinates.sum()) < 4.0 * s1.std() / math.sqrt(ev.shape[0])
        want = (x.coordinates**2).sum() + 9.0 * t
        assert abs(s2.mean() - want) < 4.0 * s2.std() / math.sqrt(ev.shape[0])

    def test_validation(self):
        with pytest.raises(DomainError):
            sample_eigenvalues(WeylPoint([0.0]), 0.0, RngStream(1, 0), 10)
        with pytest.raises(DomainError):
            sample_eigenvalues(WeylPoint([0.0]), 1.0, RngStream(1, 0), 0)


class TestInterpolationWeight:
    def test_kronecker_property(self):
        xs = np.array([-1.3, 0.2, 0.9, 2.4])
        xi = PointConfiguration(xs)
        for i, u in enumerate(xs):
            for j, z in enumerate(xs):
                val = interpolation_weight(xi, u, z)
                assert val == pytest.approx(1.0 if i == j else 0.0, abs=1e-14)

    def test_two_point_factor(self):
        xi = PointConfiguration([0.0, 1.0])
        for z in (0.3 + 0.1j, -2.0, 1.7j):
            assert interpolation_weight(xi, 0.0, z) == pytest.approx(1.0 - z, rel=1e-15)

    def test_determinant_equals_vandermonde_ratio(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            xs = np.sort(rng.normal(size=3))
            zs = np.sort(rng.normal(size=3))
            xi = PointConfiguration(xs)
            m = np.array([[interpolation_weight(xi, u, z) for z in zs] for u in xs])
            lhs = np.linalg.det(m).real
            rhs = vandermonde(zs) / vandermonde(xs)
            assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(rhs))

    def test_matches_expanded_polynomial(self):
        rng = np.random.default_rng(6)
        xs = np.sort(rng.normal(size=5))
        xi = PointConfiguration(xs)
        u = xs[2]
        others = xs[np.arange(5) != 2]
        # same polynomial, assembled from its roots
        coeffs = np.poly(others) / np.prod(others - u)
        pts = rng.normal(size=50) + 1j * rng.normal(size=50)
        got = interpolation_weight(xi, u, pts)
        want = np.polyval(coeffs, pts) * (-1.0) ** len(others)
        assert np.max(np.abs(got - want)) < 1e-10

    def test_unknown_pin_rejected(self):
        with pytest.raises(DomainError):
            interpolation_weight(PointConfiguration([0.0, 1.0]), 0.5, 0.2)


class TestLatticeWeight:
    def test_closed_form_values(self):
        assert lattice_interpolation_weight(0, 0.0) == pytest.approx(1.0, abs=1e-15)
        assert lattice_interpolation_weight(0, 3.0) == pytest.approx(0.0, abs=1e-15)
        assert lattice_interpolation_weight(2, 2.5) == pytest.approx(2.0 / math.pi, rel=1e-12)

    def test_partial_products_converge_like_inverse_window(self):
        z = 0.37 + 0.2j
        exact = lattice_interpolation_weight(0, z)
        errs = [abs(lattice_interpolation_partial(0, z, w) - exact) for w in (100, 200, 400, 800)]
        for a, b in zip(errs, errs[1:]):
            assert b < 0.7 * a
        assert errs[-1] < 5e-4

    def test_validation(self):
        with pytest.raises(DomainError):
            lattice_interpolation_weight(0.5, 1.0)
        with pytest.raises(DomainError):
            lattice_interpolation_partial(0, 1.0, 0)


class TestHciz:
    def test_two_by_two_identity(self):
        rec = hciz_check(WeylPoint([-1.0, 1.0]), WeylPoint([-0.5, 0.5]), 1.0, 200000, RngStream(11, 0))
        assert abs(rec["mc_estimate"] - rec["rhs"]) < 3.0 * rec["stderr"]
        assert rec["mc_estimate"] <= 1.0
        assert rec["time_parameter"] == 1.0

    def test_single_point_is_exact(self):
        rec = hciz_check(WeylPoint([0.3]), WeylPoint([1.1]), 2.0, 10, RngStream(1, 0))
        assert rec["mc_estimate"] == pytest.approx(rec["rhs"], abs=1e-12)
        assert rec["stderr"] == 0.0

    def test_validation(self):
        with pytest.raises(DomainError):
            hciz_check(WeylPoint([-1.0, 0.0, 1.0]), WeylPoint([-1.0, 0.0, 1.0]), 1.0, 10, RngStream(1, 0))
        with pytest.raises(DomainError):
            hciz_check(WeylPoint([0.0, 1.0]), WeylPoint([0.0, 1.0]), 0.0, 10, RngStream(1, 0))
