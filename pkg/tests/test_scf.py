import math

import numpy as np
import pytest

from bodyorder.lattice import Configuration, assemble, make_chain
from bodyorder.linear import interp_build
from bodyorder.potential import IntervalSet, fejer_points, solve_gap_params
from bodyorder.ratefit import ErrorCurve, convergence_order, fit_rate
from bodyorder.scf import (
    EffectivePotentialSpec,
    SCFConvergenceError,
    damped_fixed_point,
    history_to_csv,
    newton_scf,
    potential_from_density,
    scf_map,
    stability,
)
from bodyorder.spectral import FermiDirac, eig

WEAK = EffectivePotentialSpec(yukawa_strength=0.1, yukawa_tau=1.0)


def _setup(n, model, amp=0.5):
    conf = make_chain(n, 1.0, (amp, -amp))
    ref = eig(assemble(conf, model)).eigenvalues
    homo, lumo = ref[n // 2 - 1], ref[n // 2]
    return conf, ref, FermiDirac(100.0, 0.5 * (homo + lumo))


@pytest.fixture
def chain12(model):
    return _setup(12, model)


@pytest.fixture
def fejer40(chain12):
    _, ref, _ = chain12
    pad = 0.02
    E = IntervalSet((ref[0] - pad, ref[5] + pad, ref[6] - pad, ref[-1] + pad))
    return interp_build(fejer_points(solve_gap_params(E), 40))


@pytest.fixture
def exact_fp(chain12, model):
    conf, _, f = chain12
    return newton_scf(WEAK, conf, model, f, np.full(12, 0.5), tol=1e-13)


class TestPotential:
    def test_three_site_yukawa(self):
        conf = make_chain(3, 1.0)
        spec = EffectivePotentialSpec(yukawa_strength=0.7, yukawa_tau=1.3)
        v = potential_from_density(spec, conf, [1.5, 0.5, 0.5])
        np.testing.assert_allclose(v, [0.0, 0.7 * math.exp(-1.3), 0.7 * math.exp(-2.6) / 2], rtol=1e-14)

    def test_onsite_cubic(self):
        conf = make_chain(2, 1.0)
        spec = EffectivePotentialSpec(onsite=(1.0, -2.0, 0.0, 3.0))
        rho = np.array([0.2, 0.9])
        np.testing.assert_allclose(potential_from_density(spec, conf, rho), 1 - 2 * rho + 3 * rho**3, rtol=1e-14)

    def test_rejects_bad_specs(self):
        with pytest.raises(ValueError):
            EffectivePotentialSpec(onsite=(0, 0, 0, 0, 1))
        with pytest.raises(ValueError):
            EffectivePotentialSpec(yukawa_tau=0.0)
        with pytest.raises(ValueError):
            potential_from_density(WEAK, make_chain(3, 1.0), [0.5, 0.5])


class TestZeroCoupling:
    def test_stability_vanishes(self, chain12, model):
        conf, _, f = chain12
        L = stability(EffectivePotentialSpec(), conf, model, f, np.full(12, 0.5))
        assert np.abs(L.matrix).max() == 0.0
        assert L.min_singular_value == pytest.approx(1.0)

    def test_newton_one_step(self, chain12, model):
        conf, _, f = chain12
        res = newton_scf(EffectivePotentialSpec(), conf, model, f, np.full(12, 0.5))
        assert len(res.history) == 2 and res.history[-1] <= 1e-10

    def test_full_mixing_one_step(self, chain12, model):
        conf, _, f = chain12
        res = damped_fixed_point(EffectivePotentialSpec(), conf, model, f, np.full(12, 0.5), alpha=1.0)
        assert len(res.history) == 2 and res.history[-1] <= 1e-10


def test_symmetric_dimer(model):
    # two equivalent sites: the fixed point keeps the mirror symmetry
    conf = Configuration(np.array([[0.0, 0, 0], [1.0, 0, 0]]))
    f = FermiDirac(50.0, 0.0)
    res = newton_scf(WEAK, conf, model, f, [0.3, 0.7])
    assert res.rho[0] == pytest.approx(res.rho[1], abs=1e-9)
    assert res.history[-1] <= 1e-10


class TestStability:
    def test_matches_finite_differences(self, chain12, model, rng):
        conf, _, f = chain12
        rho = 0.5 + 0.05 * rng.standard_normal(12)
        L = stability(WEAK, conf, model, f, rho).matrix
        for h in (1e-6, 1e-5):
            fd = np.empty_like(L)
            for k in range(12):
                e = np.zeros(12)
                e[k] = h
                fd[:, k] = (scf_map(WEAK, conf, model, f, rho + e) - scf_map(WEAK, conf, model, f, rho - e)) / (2 * h)
            np.testing.assert_allclose(L, fd, atol=1e-6)

    def test_with_interpolated_observable(self, chain12, model, fejer40, exact_fp):
        conf, _, f = chain12
        exact = stability(WEAK, conf, model, f, exact_fp.rho).matrix
        approx = stability(WEAK, conf, model, f, exact_fp.rho, fejer40).matrix
        np.testing.assert_allclose(approx, exact, atol=1e-6)

    def test_decays_off_diagonal(self, model):
        conf, _, f = _setup(20, model)
        # a short-range kernel isolates the locality of the response itself
        spec = EffectivePotentialSpec(onsite=(0.0, 0.3))
        L = stability(spec, conf, model, f, np.full(20, 0.5)).matrix
        d = np.arange(1, 15)
        fit = fit_rate(ErrorCurve.from_values(d, np.abs(L[2, 2 + d])))
        assert fit.slope < 0 and fit.r2 >= 0.9


class TestNewton:
    def test_converges_quadratically(self, exact_fp):
        assert exact_fp.history[-1] <= 1e-13
        assert convergence_order(exact_fp.history) >= 1.8

    def test_longer_history_order(self, model):
        conf, _, f = _setup(12, model)
        spec = EffectivePotentialSpec(onsite=(-0.15, 0.3), yukawa_strength=0.1)
        res = newton_scf(spec, conf, model, f, np.full(12, 0.2), tol=1e-13)
        h = np.array(res.history)
        h = h[h > 1e-13]
        assert h.size >= 3
        # quadratic contraction: e_{i+1} / e_i^2 stays bounded
        assert np.all(h[1:] / h[:-1] ** 2 < 1.0)

    def test_fixed_point_residual(self, exact_fp, chain12, model):
        conf, _, f = chain12
        assert np.abs(exact_fp.rho - scf_map(WEAK, conf, model, f, exact_fp.rho)).max() <= 1e-13

    def test_approx_observable(self, chain12, model, fejer40, exact_fp):
        conf, _, f = chain12
        gap = np.abs(scf_map(WEAK, conf, model, f, exact_fp.rho, fejer40) - scf_map(WEAK, conf, model, f, exact_fp.rho))
        assert gap.max() <= 1e-6
        approx = newton_scf(WEAK, conf, model, f, np.full(12, 0.5), fejer40, tol=1e-12)
        L = stability(WEAK, conf, model, f, exact_fp.rho)
        amp = 1.0 / L.min_singular_value
        # the fixed-point shift is the map perturbation amplified by (I - L)^-1
        assert np.abs(approx.rho - exact_fp.rho).max() <= 2 * amp * gap.max() + 1e-12

    def test_fixed_point_gap_shrinks_with_nodes(self, chain12, model, exact_fp):
        conf, ref, f = chain12
        E = IntervalSet((ref[0] - 0.02, ref[5] + 0.02, ref[6] - 0.02, ref[-1] + 0.02))
        params = solve_gap_params(E)
        gaps = []
        for n in (20, 40):
            X = interp_build(fejer_points(params, n))
            r = newton_scf(WEAK, conf, model, f, np.full(12, 0.5), X, tol=1e-12)
            gaps.append(np.abs(r.rho - exact_fp.rho).max())
        assert gaps[1] < gaps[0]

    def test_iteration_budget_exhausted(self, model):
        conf = make_chain(4, 1.0)
        with pytest.raises(SCFConvergenceError):
            newton_scf(WEAK, conf, model, FermiDirac(10.0, 0.0), np.full(4, 0.5), max_iter=0, tol=0.0)


class TestMixing:
    @pytest.mark.parametrize("alpha", [0.3, 0.7])
    def test_rate_matches_linearisation(self, chain12, model, exact_fp, alpha):
        conf, _, f = chain12
        res = damped_fixed_point(WEAK, conf, model, f, np.full(12, 0.5), alpha=alpha, tol=1e-12)
        assert res.history[-1] <= 1e-12
        L = stability(WEAK, conf, model, f, exact_fp.rho).matrix
        predicted = np.abs(np.linalg.eigvals((1 - alpha) * np.eye(12) + alpha * L)).max()
        h = np.array(res.history)
        tail = h[(h < 1e-4) & (h > 1e-11)]
        measured = np.exp(np.polyfit(np.arange(tail.size), np.log(tail), 1)[0])
        assert abs(measured - predicted) <= 0.05

    def test_agrees_with_newton(self, chain12, model, exact_fp):
        conf, _, f = chain12
        res = damped_fixed_point(WEAK, conf, model, f, np.full(12, 0.5), alpha=0.5, tol=1e-12)
        np.testing.assert_allclose(res.rho, exact_fp.rho, atol=1e-11)

    def test_divergence_guard(self, chain12, model):
        conf, _, f = chain12
        strong = EffectivePotentialSpec(onsite=(0.0, 20.0))
        with pytest.raises(SCFConvergenceError) as info:
            damped_fixed_point(strong, conf, model, f, np.full(12, 0.5) + 0.01, alpha=1.0)
        assert len(info.value.history) >= 2

    def test_alpha_range(self, chain12, model):
        conf, _, f = chain12
        with pytest.raises(ValueError):
            damped_fixed_point(WEAK, conf, model, f, np.full(12, 0.5), alpha=0.0)


def test_history_csv():
    text = history_to_csv([0.5, 1e-3])
    assert text.splitlines() == ["iteration,residual_inf", "0,0.5", "1,0.001"]
