"""
Locality of the interpolated observable
=======================================

Sensitivity of a site's occupation to distant on-site potentials, and the
error of the two truncation schemes as the cutoff radius grows.
"""
from bodyorder.experiments import preset, run_locality, run_truncation

loc = run_locality(preset("locality"))
for m, r, d in loc.rows[20::3]:
    print(f"distance {r:5.1f}  |dO/dv| {d:.3e}")
print(loc.footer[0])

tr = run_truncation(preset("truncation"))
for r_c, band, nbh in tr.rows:
    print(f"r_c {r_c:5.1f}  banded {band:.3e}  neighbourhood {nbh:.3e}")
print("\n".join(tr.footer))
