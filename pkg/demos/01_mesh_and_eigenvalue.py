# %% [markdown]
# Mesh the test domain and compute the smallest eigenvalue of the Robin
# problem on three successively finer grids.

# %%
import numpy as np

from fracdiff.assembly import Coefficients, assemble
from fracdiff.geometry import GRID_H, domain_area, reference_grid
from fracdiff.linalg import smallest_eigenpair

# %%
meshes = {g: reference_grid(g) for g in GRID_H}
for g, m in meshes.items():
    print(f"grid {g}: h={GRID_H[g]}, {m.n_nodes} nodes, {m.n_triangles} triangles, "
          f"min angle {m.min_angle():.1f} deg, area excess {m.area() - domain_area():.2e}")

# %% lambda_1 drops slightly under refinement, most visibly for large mu
for mu in (1.0, 10.0, 100.0):
    vals = [smallest_eigenpair(assemble(m, Coefficients(mu=mu))).value for m in meshes.values()]
    print(f"mu={mu:5g}: " + "  ".join(f"{v:.6f}" for v in vals))

# %% the eigenfunction for mu=1 is nearly flat, for mu=100 it vanishes toward the boundary
for mu in (1.0, 100.0):
    v = smallest_eigenpair(assemble(meshes[2], Coefficients(mu=mu))).vector
    v = v * np.sign(v.sum())
    print(f"mu={mu:5g}: min/max of eigenvector = {v.min() / v.max():.3f}")
