"""
Recursion method versus linear interpolation with a defect
==========================================================

A mid-gap defect state slows any linear scheme built on the polluted
interval set. The Gauss-quadrature (recursion) approximation adapts to the
defect and keeps the defect-free rate.
"""
from bodyorder.experiments import preset, run_converge

bop = run_converge(preset("bop-defect"))
for c in bop.comments:
    print("#", c)
for K, _, err, rate in bop.rows[::5]:
    print(f"K={K:3d}  degree {2 * K + 1:3d}  error {err:.3e}  rate so far {rate:.4f}")

lin = run_converge(preset("fejer-defect-polluted"))
print("linear scheme on the polluted set, final measured rate:", lin.rows[-1][-1])
