"""Experiment recipes: eigenvalue table, stationary sweeps, evolutions and
sigma sweeps.  Each returns plain rows ready for CSV output."""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .assembly import Coefficients, FemSystem, assemble, assemble_load, l2_project, logistic_source
from .fracpow import FracPowConfig, apply_inv_fracpow
from .geometry import Mesh
from .linalg import smallest_eigenpair
from .timestepping import SchemeConfig, a_priori_bound, run_evolution

# a run counts as unstable once its M-norm exceeds this multiple of the
# a priori bound of the continuous problem
GROWTH_FACTOR = 2.0


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def table1(meshes: list[Mesh], mus=(1.0, 10.0, 100.0), tol: float = 1e-10, jobs: int = 1) -> list[tuple]:
    """Rows (grid, mu, lambda1, iterations, seconds)."""
    cases = [(g, mesh, mu) for g, mesh in enumerate(meshes, start=1) for mu in mus]

    def one(case):
        g, mesh, mu = case
        t0 = time.perf_counter()
        pair = smallest_eigenpair(assemble(mesh, Coefficients(mu=mu)), tol=tol)
        return (g, mu, pair.value, pair.iterations, time.perf_counter() - t0)

    return _map(one, cases, jobs)


@dataclass
class StationaryResult:
    rows: list[tuple]  # (K, eta, y_max, M_norm, error_vs_finest)
    delta: float
    lambda1: float


def stationary(sys: FemSystem, beta: float, ksteps=(5, 10, 20, 40), gamma: float = 0.0,
               stepper: str = "cn", delta: float | None = None, jobs: int = 1) -> StationaryResult:
    """Solve A^beta y = P f for each number of pseudo-time steps.

    The error column is the M-norm distance to the solution with the largest K.
    """
    lam1 = sys.lambda1
    delta = 0.99 * lam1 if delta is None else delta
    psi = l2_project(sys, assemble_load(sys.mesh, logistic_source(gamma)))
    ks = sorted(ksteps)

    def one(k):
        return apply_inv_fracpow(sys, psi, FracPowConfig(beta, delta, k, stepper))

    ys = _map(one, ks, jobs)
    ref = ys[-1]
    rows = []
    for k, y in zip(ks, ys):
        e = y - ref
        rows.append((k, 1.0 / k, float(y.max()), _mnorm(sys, y), _mnorm(sys, e)))
    return StationaryResult(rows, delta, lam1)


def _mnorm(sys, w):
    return math.sqrt(max(float(w @ (sys.M @ w)), 0.0))


def classify(sys: FemSystem, cfg: SchemeConfig, record, load) -> str:
    if record.diverged:
        return "diverged"
    bound = a_priori_bound(sys, cfg, load)
    return "stable" if np.nanmax(record.m_norm) <= GROWTH_FACTOR * bound else "diverged"


def evolve(sys: FemSystem, cfg: SchemeConfig, monitor_d: bool = False):
    """Returns (rows, status, resolved config); rows are (n, t, w_max, M_norm[, D_norm])."""
    cfg = cfg.resolve(sys)
    load = assemble_load(sys.mesh, logistic_source(cfg.gamma))
    rec = run_evolution(sys, cfg, load=load, monitor_d=monitor_d)
    status = classify(sys, cfg, rec, load)
    rows = []
    for n in range(cfg.n_steps + 1):
        row = (n, rec.times[n], rec.w_max[n], rec.m_norm[n])
        if monitor_d:
            row += (rec.d_norm[n],)
        rows.append(row)
    return rows, status, cfg


def sigma_sweep(sys: FemSystem, cfg: SchemeConfig, sigmas, jobs: int = 1):
    """One evolution per sigma.  Returns (rows, sigma_star, resolved config).

    rows are (sigma, w_max at T, max M_norm, status); sigma_star is the
    smallest tested sigma whose run is stable (None if none is).
    """
    cfg = cfg.resolve(sys)
    load = assemble_load(sys.mesh, logistic_source(cfg.gamma))

    def one(sigma):
        c = replace(cfg, sigma=sigma)
        rec = run_evolution(sys, c, load=load)
        status = classify(sys, c, rec, load)
        return (sigma, rec.w_max[-1], float(np.nanmax(rec.m_norm)), status)

    rows = _map(one, list(sigmas), jobs)
    stable = [r[0] for r in rows if r[3] == "stable"]
    return rows, (min(stable) if stable else None), cfg
