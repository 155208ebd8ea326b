"""
Smoothing of the finite element error operator
==============================================

F_h(t) = S_h(t) P_h - S(t) for P1 elements.  Its operator norm is found by
power iteration; the scaled quantity t ||F_h(t)|| / h^2 stays bounded in
both t and h.
"""

import numpy as np

from levy_galerkin import experiments as ex
from levy_galerkin.fem import FemMesh, discrete_eigenvalues, h_distance, r_h_project
from levy_galerkin.spectral import eigenvalues, unit_vector

rep = ex.smoothing_check(ex.DEFAULT_T_GRID, ex.DEFAULT_FEM_LEVELS)
print(f"{'h':>8} {'t':>6} {'norm':>12} {'t*norm/h^2':>11}")
for h, t, norm, ratio in rep.rows:
    print(f"{h:8.5f} {t:6.2f} {norm:12.4e} {ratio:11.5f}")
print("max ratio per level:", {round(h, 5): round(r, 5) for h, r in rep.max_ratio.items()})
print("norm reduction when h halves:", np.round(list(rep.reductions.values()), 3))

# %%
# Where the error comes from
# --------------------------
# The discrete eigenvalues overshoot (k pi)^2 by a relative O(h^2), and the
# Ritz projection of a smooth function is O(h^2) accurate.

for M in (7, 31, 127):
    d = FemMesh(M)
    rel = discrete_eigenvalues(d)[:3] / eigenvalues(3) - 1
    e1 = unit_vector(1, 1)
    ritz = h_distance(r_h_project(e1, d), d, e1)
    print(f"M={M:4d}  eigenvalue overshoot {np.round(rel, 6)}  ||R_h e1 - e1|| / h^2 = {ritz / d.h**2:.4f}")
