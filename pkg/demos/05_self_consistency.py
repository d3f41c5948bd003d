"""
Self-consistent field with an interpolated observable
=====================================================

Newton's method on a 12-site chain with a weak Yukawa interaction, once with
the exact Fermi-Dirac map and once with its 40-point Fejer interpolant.
"""
import numpy as np

from bodyorder.lattice import HoppingModel, assemble, make_chain
from bodyorder.linear import interp_build
from bodyorder.potential import IntervalSet, fejer_points, solve_gap_params
from bodyorder.ratefit import convergence_order
from bodyorder.scf import EffectivePotentialSpec, damped_fixed_point, newton_scf, stability
from bodyorder.spectral import FermiDirac, eig

model = HoppingModel(3.6, 2.0)
conf = make_chain(12, 1.0, (0.5, -0.5))
ref = eig(assemble(conf, model)).eigenvalues
f = FermiDirac(100.0, 0.5 * (ref[5] + ref[6]))  # chemical potential mid-gap
spec = EffectivePotentialSpec(yukawa_strength=0.1, yukawa_tau=1.0)
rho0 = np.full(12, 0.5)

exact = newton_scf(spec, conf, model, f, rho0, tol=1e-13)
print("Newton residuals:", ["%.1e" % e for e in exact.history])
print("estimated order:", round(convergence_order(exact.history), 3))

# node set: both bands padded by 0.02 on each side
E = IntervalSet((ref[0] - 0.02, ref[5] + 0.02, ref[6] - 0.02, ref[-1] + 0.02))
X = interp_build(fejer_points(solve_gap_params(E), 40))
approx = newton_scf(spec, conf, model, f, rho0, X, tol=1e-12)
print("fixed-point difference:", np.abs(approx.rho - exact.rho).max())

L = stability(spec, conf, model, f, exact.rho)
print("smallest singular value of I - L:", L.min_singular_value)
mixed = damped_fixed_point(spec, conf, model, f, rho0, alpha=0.5)
print("linear mixing steps:", len(mixed.history) - 1)
