# %% [markdown]
# Time evolution of the fractional diffusion problem with the regularized
# scheme, the stability operator D, and a sweep over the regularization
# weight sigma.

# %%
import numpy as np

from fracdiff.assembly import Coefficients, assemble
from fracdiff.experiments import evolve, sigma_sweep
from fracdiff.geometry import generate_mesh, reference_grid
from fracdiff.timestepping import SchemeConfig, sigma_min, verify_stability_operator

# %% D >= I at sigma_min on a small mesh (dense check)
small = assemble(generate_mesh(0.07), Coefficients(mu=10.0))
for alpha in (0.25, 0.5, 0.75, 0.95):
    cfg = SchemeConfig(alpha, 0.1, 1, sigma=sigma_min(alpha, small.lambda1), delta=small.lambda1,
                       stepper="euler")
    print(f"alpha={alpha}: sigma_min={cfg.sigma:.4f}, min eig D={verify_stability_operator(small, cfg).min_eig_d:.3f}")

# %% grid 2, N=40 up to T=0.1
sys = assemble(reference_grid(2), Coefficients(mu=10.0))
for alpha in (0.5, 0.95):
    rows, status, cfg = evolve(sys, SchemeConfig(alpha, 0.0025, 40, sigma=0.5, delta=50.0))
    print(f"alpha={alpha}: w_max(T)={rows[-1][2]:.5f}, status={status}")

# %% how small can sigma get before the run blows up?
sigmas = [0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01, 0.0]
for alpha in (0.5, 0.95):
    rows, star, _ = sigma_sweep(sys, SchemeConfig(alpha, 0.0025, 40, delta=50.0), sigmas, jobs=4)
    print(f"alpha={alpha}: " + ", ".join(f"{s:g}:{st[0]}" for s, _, _, st in rows) + f"  -> sigma*={star}")
