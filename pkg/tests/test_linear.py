import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from bodyorder.lattice import Configuration, HoppingModel, assemble, make_chain
from bodyorder.linear import (
    ClusterTooLargeError,
    DampingKernel,
    Interpolant,
    bernstein_bound,
    body_order_component,
    body_order_expansion,
    cheb_interp,
    cheb_project,
    interp_build,
    interp_eval,
    kpm_estimate,
    kpm_moments,
    matrix_interpolant,
    nodes_from_csv,
    nodes_to_csv,
    vacuum_moment,
    vacuum_sum,
)
from bodyorder.potential import IntervalSet, asymptotic_rate, fejer_points, green_value, solve_gap_params
from bodyorder.spectral import FermiDirac, GrandPotential, Polynomial, eig, local_observable, moments

E1 = IntervalSet.parse("[-1,-0.2]U[0.2,1]")


def restricted_path_sum(H, l, j, max_others):
    """Closed paths of length j from l visiting at most ``max_others`` distinct other sites."""
    n = H.shape[0]
    total = 0.0
    for mid in itertools.product(range(n), repeat=j - 1):
        if len(set(mid) - {l}) > max_others:
            continue
        path = (l, *mid, l)
        total += np.prod([H[a, b] for a, b in zip(path, path[1:])])
    return total


class TestInterpolation:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 25), st.integers(0, 10_000))
    def test_polynomial_exactness(self, n, seed):
        rng = np.random.default_rng(seed)
        # random interval and well-conditioned (Chebyshev-type) nodes; uniform
        # random nodes have exponentially large Lebesgue constants
        a = rng.uniform(-2, 0)
        b = a + rng.uniform(0.5, 3)
        t = np.cos(np.pi * (np.arange(n) + 0.5) / n)
        X = interp_build(0.5 * (a + b) + 0.5 * (b - a) * t)
        coef = rng.normal(size=n)
        p = Polynomial(tuple(coef))
        z = rng.uniform(a, b, 20)
        scale = np.max(np.abs(p(np.linspace(a, b, 200))))
        np.testing.assert_allclose(interp_eval(X, p, z), p(z), rtol=0, atol=1e-10 * scale)

    def test_quadratic(self):
        assert interp_eval(interp_build([-1, 0, 1]), lambda z: z**2, 0.5) == pytest.approx(0.25)

    def test_exact_at_nodes_and_derivative(self):
        X = interp_build(np.linspace(-1, 1, 9))
        p = Interpolant(X, np.cos)
        np.testing.assert_allclose(p(X.nodes), np.cos(X.nodes), atol=1e-15)
        z = np.array([-0.7, 0.0, 0.33, X.nodes[3]])
        h = 1e-6
        np.testing.assert_allclose(p.derivative(z), (p(z + h) - p(z - h)) / (2 * h), atol=1e-7)

    def test_duplicate_nodes(self):
        with pytest.raises(ValueError):
            interp_build([0.0, 0.5, 0.5])

    def test_many_nodes_weights_finite(self):
        X = interp_build(fejer_points(solve_gap_params(IntervalSet((-0.05, 0.05))), 400))
        assert np.all(np.isfinite(X.barycentric_weights))

    def test_fejer_error_decreases(self):
        p = solve_gap_params(E1)
        f = FermiDirac(100.0, 0.0)
        grid = E1.grid(2000)
        err = [np.max(np.abs(interp_eval(interp_build(fejer_points(p, n)), f, grid) - f(grid))) for n in (30, 60)]
        assert err[1] < err[0]

    def test_lebesgue_sanity_on_equipotential(self):
        p = solve_gap_params(E1)
        f = FermiDirac(100.0, 0.0)
        level = 0.5 * asymptotic_rate(p, f)
        contour = []
        for x in np.linspace(-1.1, 1.1, 23):
            if green_value(p, x) >= level:
                continue
            y = brentq(lambda y: green_value(p, complex(x, y)) - level, 0.0, 2.0, xtol=1e-10)
            contour += [complex(x, y), complex(x, -y)]
        contour = np.array(contour)
        bound = 10 * np.max(np.abs(f(E1.grid(2000))))
        for n in (20, 60, 100):
            X = interp_build(fejer_points(p, n))
            assert np.max(np.abs(interp_eval(X, f, contour))) < bound


class TestMatrixInterpolant:
    def test_polynomial_matches(self, gapped_chain, model):
        ed = eig(assemble(gapped_chain, model))
        p = Polynomial((0.1, -0.3, 0.2, 0.5))
        X = interp_build(np.linspace(-1.5, 1.5, 6))
        assert matrix_interpolant(ed, X, p, 4) == pytest.approx(local_observable(ed, p, 4), abs=1e-10)

    def test_nodes_on_spectrum(self, gapped_chain, model):
        ed = eig(assemble(gapped_chain, model))
        f = FermiDirac(math.inf, -0.13)
        X = interp_build(ed.eigenvalues)
        assert matrix_interpolant(ed, X, f, 5) == pytest.approx(local_observable(ed, f, 5), abs=1e-10)

    @pytest.mark.parametrize("n", [8, 20, 40])
    def test_spectral_sup_bound(self, gapped_chain, model, n):
        ed = eig(assemble(gapped_chain, model))
        f = FermiDirac(100.0, -0.13)
        E = IntervalSet.from_intervals([(ed.eigenvalues[0], -0.3), (0.05, ed.eigenvalues[-1])])
        X = interp_build(fejer_points(solve_gap_params(E), n))
        lhs = abs(local_observable(ed, f, 3) - matrix_interpolant(ed, X, f, 3))
        rhs = np.max(np.abs(f(ed.eigenvalues) - interp_eval(X, f, ed.eigenvalues)))
        assert lhs <= rhs + 1e-12


class TestChebyshev:
    def test_t3_coefficients(self):
        c = cheb_project(lambda z: 4 * z**3 - 3 * z, 6).coefficients
        np.testing.assert_allclose(c, [0, 0, 0, 1, 0, 0, 0], atol=1e-12)

    def test_affine_map(self):
        c = cheb_project(lambda z: z, 3, (0.0, 2.0)).coefficients
        np.testing.assert_allclose(c[:2], [1, 1], atol=1e-12)

    def test_interp_exact_for_polynomials(self):
        s = cheb_interp(lambda z: z**4 - z, 6, (-2.0, 1.0))
        z = np.linspace(-2, 1, 11)
        np.testing.assert_allclose(s(z), z**4 - z, atol=1e-12)

    @pytest.mark.parametrize("N", [10, 20, 40, 60])
    def test_bernstein_bound(self, N):
        f = FermiDirac(10.0, 0.0)
        x = np.linspace(-1, 1, 4001)
        err = np.max(np.abs(cheb_project(f, N)(x) - f(x)))
        assert err <= bernstein_bound(f, N)


class TestKPM:
    def test_full_series(self, gapped_chain, model):
        H = assemble(gapped_chain, model)
        f = FermiDirac(20.0, -0.13)
        est = kpm_estimate(H, 6, f, 200)
        assert est == pytest.approx(local_observable(eig(H), f, 6), abs=1e-8)

    def test_t2_moment(self, gapped_chain, model):
        H = assemble(gapped_chain, model)
        interval = (-2.0, 2.0)
        t2 = lambda z: 2 * (z / 2) ** 2 - 1
        mu = kpm_moments(H, 2, 4, interval)
        assert kpm_estimate(H, 2, t2, 2, interval=interval) == pytest.approx(mu[2], abs=1e-12)
        A = H.matrix / 2
        assert mu[2] == pytest.approx(2 * (A @ A)[2, 2] - 1, abs=1e-12)

    def test_matches_projection_evaluation(self, gapped_chain, model):
        H = assemble(gapped_chain, model)
        ed = eig(H)
        f = GrandPotential(15.0, -0.13)
        interval = (-1.5, 1.5)
        s = cheb_project(f, 30, interval, n_quad=512)
        direct = float(np.dot(s(ed.eigenvalues), ed.eigenvectors[4] ** 2))
        assert kpm_estimate(H, 4, f, 30, interval=interval) == pytest.approx(direct, abs=1e-9)

    def test_fejer_kernel_suppresses_overshoot(self):
        f = FermiDirac(20.0, 0.0)
        x = np.linspace(-1, 1, 4001)
        plain = cheb_project(f, 12, n_quad=512)
        damped = plain.damped(DampingKernel("fejer"))
        over = lambda s: max(0.0, -s(x).min(), s(x).max() - 1.0)
        assert over(damped) <= 1e-3 < over(plain)

    def test_jackson_kernel_endpoints(self):
        g = DampingKernel("jackson").coefficients(50)
        assert g[0] == pytest.approx(1.0) and abs(g[-1]) < 1e-2

    def test_unknown_kernel(self):
        with pytest.raises(ValueError):
            DampingKernel("lorentz")


class TestBodyOrder:
    def test_isolated_atom(self):
        conf = make_chain(4, 1.0, (0.2, -0.2))
        m = HoppingModel(1.0, 1.0)
        X = interp_build(np.linspace(-1, 1, 5))
        f = FermiDirac(5.0, 0.0)
        assert body_order_component(conf, m, X, f, 1, []) == pytest.approx(float(interp_eval(X, f, -0.2)))

    def test_non_interacting_pair(self):
        conf = Configuration([0.0, 1.0, 500.0], [0.1, -0.1, 0.3])
        X = interp_build(np.linspace(-1, 1, 6))
        v = body_order_component(conf, HoppingModel(1, 1), X, FermiDirac(5.0, 0.0), 0, [2])
        assert abs(v) < 1e-12

    @pytest.mark.parametrize("n_nodes", [3, 5, 8])
    @pytest.mark.parametrize("n_sites,t0", [(6, 0.0), (5, 0.2)])
    def test_full_reconstruction(self, n_sites, t0, n_nodes):
        conf = make_chain(n_sites, 1.0, (0.3, -0.2, 0.1))
        m = HoppingModel(1.0, 1.0, three_centre_t0=t0)
        X = interp_build(fejer_points(solve_gap_params(IntervalSet((-1.5, 1.5))), n_nodes))
        f = FermiDirac(10.0, 0.05)
        site = 2
        total = body_order_expansion(conf, m, X, f, site)
        assert total == pytest.approx(matrix_interpolant(eig(assemble(conf, m)), X, f, site), abs=1e-9)

    def test_high_body_order_vanishes(self):
        # degree-(N-1) polynomial: two-centre clusters with >= N neighbours contribute nothing
        conf = make_chain(6, 1.0, (0.3, -0.2))
        m = HoppingModel(1.0, 1.0)
        X = interp_build(np.linspace(-1.2, 1.2, 4))
        f = FermiDirac(10.0, 0.0)
        for K in itertools.combinations([0, 1, 3, 4, 5], 4):
            assert abs(body_order_component(conf, m, X, f, 2, K)) < 1e-12

    def test_guard(self):
        conf = make_chain(8)
        with pytest.raises(ClusterTooLargeError):
            body_order_component(conf, HoppingModel(), interp_build([0, 1]), FermiDirac(5.0), 0, range(1, 8))


class TestVacuum:
    def test_full_order_exact(self, model):
        conf = make_chain(6, 1.0, (0.2, -0.2))
        f = FermiDirac(math.inf, -0.13)
        ed = eig(assemble(conf, model))
        assert vacuum_sum(conf, model, f, 2, 6) == pytest.approx(local_observable(ed, f, 2), abs=1e-12)

    @pytest.mark.parametrize("N", [1, 2, 3, 4])
    def test_moments_path_oracle(self, N, rng):
        conf = Configuration([0.0, 0.9, 2.1, 3.0, 4.2], rng.normal(scale=0.3, size=5))
        m = HoppingModel(1.0, 0.8)
        H = assemble(conf, m).matrix
        full = moments(H, 1, 5)
        for j in range(1, 6):
            vm = vacuum_moment(conf, m, 1, j, N)
            assert vm == pytest.approx(restricted_path_sum(H, 1, j, N - 1), abs=1e-10)
            if j <= N:
                assert vm == pytest.approx(full[j], abs=1e-10)

    def test_slower_than_interpolation(self):
        conf = make_chain(10, 1.0, (0.2, -0.2))
        m = HoppingModel(3.6, 2.0)
        f = FermiDirac(math.inf, -0.13)
        ed = eig(assemble(conf, m))
        exact = local_observable(ed, f, 5)
        lam = ed.eigenvalues
        E = IntervalSet.from_intervals([(lam[0], lam[lam < -0.13].max()), (lam[lam > -0.13].min(), lam[-1])])
        X = interp_build(fejer_points(solve_gap_params(E), 3))
        assert abs(vacuum_sum(conf, m, f, 5, 3) - exact) > abs(matrix_interpolant(ed, X, f, 5) - exact)


def test_nodes_csv_roundtrip():
    x = fejer_points(solve_gap_params(E1), 7)
    np.testing.assert_array_equal(nodes_from_csv(nodes_to_csv(x)), x)
