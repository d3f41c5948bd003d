"""
Measured and predicted convergence rates
========================================

Fejer interpolation of a Fermi-Dirac occupation (beta = 100) on a gapped set,
then the same with a small polluting interval inside the gap.
"""
import numpy as np

from bodyorder.linear import interp_build, interp_eval
from bodyorder.potential import IntervalSet, asymptotic_rate, fejer_points, solve_gap_params
from bodyorder.ratefit import ErrorCurve, fit_rate
from bodyorder.spectral import FermiDirac

f = FermiDirac(100.0, 0.0)
Ns = np.arange(10, 151, 10)

for text in ("[-1,-0.2]U[0.2,1]", "[-1,-0.2]U[-0.06,-0.03]U[0.2,1]"):
    E = IntervalSet.parse(text)
    params = solve_gap_params(E)
    grid = E.grid(2000)
    err = [np.abs(interp_eval(interp_build(fejer_points(params, N + 1)), f, grid) - f(grid)).max() for N in Ns]
    fit = fit_rate(ErrorCurve.from_values(Ns, err), "auto-tail")
    print(text)
    for N, e in zip(Ns, err):
        print(f"  N={N:4d}  sup error {e:.3e}")
    print(f"  measured rate {fit.rate:.4f}   predicted {asymptotic_rate(params, f):.4f}")

# the polluted set converges more slowly; at small N the measured slope still
# lags the asymptotic value
