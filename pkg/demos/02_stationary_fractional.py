# %% [markdown]
# y = A^-1/2 P f with the pseudo-time Cauchy stepper, compared against the
# dense eigen-expansion on a small mesh and then run on grid 2.

# %%
import numpy as np

from fracdiff.assembly import Coefficients, assemble, assemble_load, l2_project, logistic_source, m_norm
from fracdiff.experiments import stationary
from fracdiff.fracpow import FracPowConfig, apply_inv_fracpow, oracle_fracpow
from fracdiff.geometry import generate_mesh, reference_grid

# %% small mesh: the oracle is cheap, so look at the error versus K directly
sys = assemble(generate_mesh(0.07), Coefficients(mu=10.0))
psi = l2_project(sys, assemble_load(sys.mesh, logistic_source(0.0)))
exact = oracle_fracpow(sys.spectral, psi, -0.5)
for stepper in ("euler", "cn"):
    errs = []
    for k in (8, 16, 32, 64):
        y = apply_inv_fracpow(sys, psi, FracPowConfig(0.5, sys.lambda1, k, stepper))
        errs.append(m_norm(sys, y - exact) / m_norm(sys, exact))
    print(stepper, " ".join(f"{e:.2e}" for e in errs))

# %% grid 2, Crank-Nicolson with K = 100
sys2 = assemble(reference_grid(2), Coefficients(mu=10.0))
res = stationary(sys2, beta=0.5, ksteps=[100], gamma=0.0, stepper="cn")
print(f"n={sys2.n}, delta={res.delta:.3f}, y_max={res.rows[0][2]:.6f}")

# %% the choice of delta barely matters as long as it stays below lambda_1
for delta in (50.0, 0.99 * sys2.lambda1):
    r = stationary(sys2, beta=0.5, ksteps=[10], stepper="cn", delta=delta)
    print(f"delta={delta:7.3f}: y_max={r.rows[0][2]:.6f}")

# %% Euler self-convergence in K
r = stationary(sys2, beta=0.5, ksteps=[5, 10, 20, 40], stepper="euler")
for k, eta, ymax, norm, err in r.rows:
    print(f"K={k:3d}  y_max={ymax:.6f}  |y_K - y_40|_M={err:.2e}")
