"""Oracle and invariant checks on a small mesh, run by ``fracdiff verify``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import Coefficients, FemSystem, assemble, assemble_load, l2_project, logistic_source
from .fracpow import FracPowConfig, apply_inv_fracpow, oracle_fracpow, qk_spectral_check
from .geometry import domain_area, generate_mesh
from .timestepping import SchemeConfig, run_evolution, sigma_min, verify_stability_operator


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _rel_mnorm(sys, a, b):
    e, r = a - b, b
    return math.sqrt(e @ (sys.M @ e)) / math.sqrt(r @ (sys.M @ r))


def run_checks(h: float = 0.07, mu: float = 10.0) -> list[Check]:
    mesh = generate_mesh(h)
    sys = assemble(mesh, Coefficients(mu=mu))
    spec = sys.spectral
    lam1 = sys.lambda1
    delta = 0.99 * lam1
    ones = np.ones(sys.n)
    psi = l2_project(sys, assemble_load(mesh, logistic_source(0.0)))
    out = []

    gap = mesh.area() - domain_area()
    out.append(Check("mesh area within O(h^2) of the domain", 0.0 <= gap <= h * h, f"excess {gap:.2e}"))

    asym = max(abs(sys.K - sys.K.T).max(), abs(sys.M - sys.M.T).max())
    out.append(Check("K and M symmetric", asym == 0.0, f"max asymmetry {asym:.1e}"))
    mass_err = abs(sys.M.sum() - mesh.area()) / mesh.area()
    out.append(Check("sum of mass entries equals area", mass_err <= 1e-12, f"rel err {mass_err:.1e}"))

    err = abs(lam1 - spec.eigenvalues[0]) / spec.eigenvalues[0]
    out.append(Check("inverse iteration matches dense lambda_1", err <= 1e-8, f"rel err {err:.1e}"))

    exact = oracle_fracpow(spec, psi, -0.5)
    err = _rel_mnorm(sys, apply_inv_fracpow(sys, psi, FracPowConfig(0.5, lam1, 64, "cn")), exact)
    out.append(Check("CN K=64 matches A^-1/2 oracle", err <= 1e-3, f"rel M-norm err {err:.1e}"))

    y = apply_inv_fracpow(sys, psi, FracPowConfig(0.0, delta, 7, "euler"))
    err = np.linalg.norm(y - psi) / np.linalg.norm(psi)
    out.append(Check("beta = 0 returns the input", err <= 1e-12, f"rel err {err:.1e}"))

    synth = FemSystem(mesh, sys.coeffs, sp.csr_matrix(delta * sys.M), sys.M)
    y = apply_inv_fracpow(synth, ones, FracPowConfig(0.5, delta, 10, "cn"))
    err = np.linalg.norm(y - delta ** -0.5 * ones) / np.linalg.norm(delta ** -0.5 * ones)
    out.append(Check("A = delta I returns delta^-beta w", err <= 1e-10, f"rel err {err:.1e}"))

    for stepper in ("euler", "cn"):
        cfg = FracPowConfig(0.5, delta, 5, stepper)
        lo, hi = qk_spectral_check(sys, cfg)
        cap = delta ** -0.5 + 1e-9
        ok = hi <= cap and (lo > 0.0 if stepper == "euler" else lo >= -cap)
        out.append(Check(f"Q_K spectral bounds ({stepper})", ok, f"[{lo:.4g}, {hi:.4g}], cap {cap:.4g}"))

    cfg = SchemeConfig(alpha=0.5, tau=0.1, n_steps=1, sigma=sigma_min(0.5, delta), delta=delta, stepper="euler")
    rep = verify_stability_operator(sys, cfg, n_random=20, n_levels=20)
    out.append(Check("D >= I at sigma_min", rep.min_eig_d >= 1.0 - 1e-9, f"min eig {rep.min_eig_d:.6g}"))
    out.append(Check("D-norm non-increasing, zero source", bool(rep.random_monotone),
                     f"max ratio {rep.max_ratio:.12f}"))

    load = assemble_load(mesh, logistic_source(100.0))
    tau = 0.01
    cfg = SchemeConfig(alpha=1.0, tau=tau, n_steps=20, sigma=1.0, delta=delta)
    rec = run_evolution(sys, cfg, load=load, keep_states=True)
    A = (sys.M + tau * sys.K).tocsc()
    w = np.zeros(sys.n)
    worst = 0.0
    lu = splu(A)
    for state in rec.states[1:]:
        w = lu.solve(A @ w - tau * (sys.K @ w) + tau * load)
        worst = max(worst, np.linalg.norm(state - w) / np.linalg.norm(w))
    out.append(Check("alpha = 1 matches weighted implicit scheme", worst <= 1e-10, f"max rel diff {worst:.1e}"))
    return out
