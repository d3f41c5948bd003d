"""
Interpolation nodes on a union of intervals
===========================================

Fejer and Leja points for a two-interval set, the Green's function above the
set and the capacity.
"""
import numpy as np

from bodyorder.potential import IntervalSet, capacity, fejer_points, green_value, leja_points, solve_gap_params

E = IntervalSet.parse("[-1,-0.2]U[0.2,1]")
params = solve_gap_params(E)
print("E =", E)
print("capacity:", capacity(params))

# Fejer points are quantiles of the equilibrium measure; they crowd the four edges
fej = fejer_points(params, 12)
lej = np.sort(leja_points(params, 12))
for x, y in zip(fej, lej):
    print(f"  fejer {x:+.5f}   leja {y:+.5f}")

# g_E vanishes on E and grows like log|z| far away
for z in (0.0, 0.5j, 2.0, 10.0):
    print(f"g_E({z}) = {green_value(params, z):.6f}")
