"""Time integration of dw/dt + A^alpha w = psi, w(0) = w0.

The production scheme is the regularized two-level scheme

    (I + tau R) (w^{n+1} - w^n) / tau + A Q_K(A) w^n = psi^{n+1},
    R = sigma (alpha A + (1 - alpha) I),

where Q_K(A) w ~ A^-(1-alpha) w comes from the pseudo-parabolic stepper.  The
explicit scheme uses the same A^-beta evaluation without regularization.
Backward Euler with exact A^alpha is available on the dense path for
comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .assembly import FemSystem, assemble_load, l2_project, logistic_source
from .fracpow import FracPowConfig, apply_inv_fracpow, check_delta, qk_modal
from .linalg import DENSE_MAX_N, DenseSpectral, ShiftedSolver

SCHEMES = ("regularized", "explicit", "oracle_backward_euler")
DIVERGENCE_LIMIT = 1e12
AUTO_DELTA_FACTOR = 0.99


def sigma_min(alpha: float, delta: float) -> float:
    """Smallest regularization weight with a stability guarantee when
    A^-beta is evaluated by the backward Euler pseudo-time stepper."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    return 0.5 + (1.0 - alpha) / (2.0 * alpha * delta)


@dataclass(frozen=True)
class SchemeConfig:
    alpha: float
    tau: float
    n_steps: int
    sigma: float = 0.5
    delta: float | None = None  # None: 0.99 * lambda_1, see resolve()
    ksteps: int = 10
    stepper: str = "cn"
    scheme: str = "regularized"
    gamma: float = 100.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.delta is not None and not self.delta > 0.0:
            raise ValueError("delta must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    @property
    def final_time(self) -> float:
        return self.n_steps * self.tau

    @property
    def frac(self) -> FracPowConfig:
        if self.delta is None:
            raise ValueError("delta unresolved; call resolve(sys) first")
        return FracPowConfig(self.beta, self.delta, self.ksteps, self.stepper)

    def resolve(self, sys: FemSystem) -> SchemeConfig:
        """Fill in the automatic delta from the system's smallest eigenvalue."""
        if self.delta is not None:
            return self
        return replace(self, delta=AUTO_DELTA_FACTOR * sys.lambda1)


def _regularizer_coeffs(cfg: SchemeConfig) -> tuple[float, float]:
    """(a, b) with M + tau R realized as a K + b M."""
    ts = cfg.tau * cfg.sigma
    return ts * cfg.alpha, 1.0 + ts * (1.0 - cfg.alpha)


def step_regularized(sys: FemSystem, w: np.ndarray, cfg: SchemeConfig, load_next: np.ndarray,
                     solver: ShiftedSolver | None = None) -> np.ndarray:
    """One level of the regularized scheme; ``load_next`` is M psi^{n+1}."""
    solver = solver or sys.solver
    g = apply_inv_fracpow(sys, w, cfg.frac, solver, validate=False)
    rhs = cfg.tau * ((load_next if w.ndim == 1 else load_next[:, None]) - sys.K @ g)
    a, b = _regularizer_coeffs(cfg)
    return w + solver.solve(a, b, rhs)


def step_explicit(sys: FemSystem, w: np.ndarray, cfg: SchemeConfig, load_now: np.ndarray,
                  solver: ShiftedSolver | None = None) -> np.ndarray:
    """w^{n+1} = w^n - tau A A^-beta w^n + tau psi^n; ``load_now`` is M psi^n."""
    solver = solver or sys.solver
    g = apply_inv_fracpow(sys, w, cfg.frac, solver, validate=False)
    rhs = cfg.tau * ((load_now if w.ndim == 1 else load_now[:, None]) - sys.K @ g)
    return w + solver.solve(0.0, 1.0, rhs)


def oracle_backward_euler(spec: DenseSpectral, w: np.ndarray, cfg: SchemeConfig,
                          psi_next: np.ndarray) -> np.ndarray:
    """Backward Euler with the exact fractional power: (I + tau A^alpha) w^{n+1} = w^n + tau psi."""
    tau, alpha = cfg.tau, cfg.alpha
    return spec.apply(lambda lam: 1.0 / (1.0 + tau * lam ** alpha), w + tau * psi_next)


def oracle_solution(spec: DenseSpectral, psi: np.ndarray, t: float, alpha: float,
                    w0: np.ndarray | None = None) -> np.ndarray:
    """Exact semi-discrete solution for a constant source psi."""
    def forced(lam):
        la = lam ** alpha
        return -np.expm1(-la * t) / la

    w = spec.apply(forced, psi)
    if w0 is not None:
        w = w + spec.apply(lambda lam: np.exp(-lam ** alpha * t), w0)
    return w


@dataclass
class EvolutionRecord:
    times: np.ndarray
    w_max: np.ndarray
    m_norm: np.ndarray
    d_norm: np.ndarray | None = None
    status: str = "stable"
    final: np.ndarray | None = None
    states: list[np.ndarray] = field(default_factory=list)

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"


@dataclass(frozen=True)
class StabilityMatrices:
    """Dense R and D of the regularized scheme, as operators on nodal vectors.

    ``D_modal`` is D in the M-orthonormal eigenbasis; its eigenvalues are the
    generalized eigenvalues of D.
    """

    R: np.ndarray
    D: np.ndarray
    D_modal: np.ndarray
    spectral: DenseSpectral

    def d_norm(self, w: np.ndarray) -> np.ndarray | float:
        c = self.spectral.coefficients(w)
        val = np.einsum("i...,i...->...", c, self.D_modal @ c)
        return np.sqrt(np.maximum(val, 0.0))

    def d_inv_norm(self, v: np.ndarray) -> float:
        c = self.spectral.coefficients(v)
        return math.sqrt(max(float(c @ np.linalg.solve(self.D_modal, c)), 0.0))


def stability_matrices(sys: FemSystem, cfg: SchemeConfig) -> StabilityMatrices:
    """D = I + tau (sigma (alpha A + (1 - alpha) I) - A Q_K(A) / 2), built densely.

    Q_K enters through the stepper applied to every eigenvector, so D
    describes the scheme as implemented.
    """
    if sys.n > DENSE_MAX_N:
        raise ValueError(f"dense stability analysis limited to n <= {DENSE_MAX_N}")
    cfg = cfg.resolve(sys)
    spec = sys.spectral
    lam = spec.eigenvalues
    q = qk_modal(sys, cfg.frac)
    r_modal = np.diag(cfg.sigma * (cfg.alpha * lam + 1.0 - cfg.alpha))
    aq = 0.5 * (lam[:, None] * q + q * lam[None, :])
    d_modal = np.eye(len(lam)) + cfg.tau * (r_modal - 0.5 * aq)
    V, M = spec.vectors, spec.M
    R = V @ r_modal @ V.T @ M
    D = V @ d_modal @ V.T @ M
    return StabilityMatrices(R, D, d_modal, spec)


def _load_fn(sys: FemSystem, cfg: SchemeConfig, load) -> Callable[[float], np.ndarray]:
    if load is None:
        load = assemble_load(sys.mesh, logistic_source(cfg.gamma))
    if callable(load):
        return load
    load = np.asarray(load, dtype=float)
    return lambda t: load


def run_evolution(sys: FemSystem, cfg: SchemeConfig, w0: np.ndarray | None = None, load=None,
                  monitor_d: bool = False, keep_states: bool = False,
                  solver: ShiftedSolver | None = None) -> EvolutionRecord:
    """Advance ``cfg.n_steps`` levels from ``w0`` (zero by default).

    ``load`` is the load vector M psi, either fixed or a function of time;
    by default it is assembled from the logistic source with ``cfg.gamma``.
    Runs whose M-norm exceeds 1e12 stop with status ``diverged`` and the
    remaining levels recorded as NaN.
    """
    cfg = cfg.resolve(sys)
    if cfg.scheme != "oracle_backward_euler":
        check_delta(sys, cfg.delta)
    load_at = _load_fn(sys, cfg, load)
    solver = solver or sys.solver
    w = np.zeros(sys.n) if w0 is None else np.array(w0, dtype=float)
    stab = stability_matrices(sys, cfg) if monitor_d else None

    n = cfg.n_steps
    times = cfg.tau * np.arange(n + 1)
    w_max = np.full(n + 1, np.nan)
    norms = np.full(n + 1, np.nan)
    d_norms = np.full(n + 1, np.nan) if monitor_d else None
    states = []

    def record(i, w):
        w_max[i] = w.max()
        norms[i] = math.sqrt(max(float(w @ (sys.M @ w)), 0.0))
        if stab is not None:
            d_norms[i] = stab.d_norm(w)
        if keep_states:
            states.append(w.copy())

    record(0, w)
    status = "stable"
    for i in range(n):
        t = times[i]
        if cfg.scheme == "regularized":
            w = step_regularized(sys, w, cfg, load_at(t + cfg.tau), solver)
        elif cfg.scheme == "explicit":
            w = step_explicit(sys, w, cfg, load_at(t), solver)
        else:
            psi = l2_project(sys, load_at(t + cfg.tau))
            w = oracle_backward_euler(sys.spectral, w, cfg, psi)
        norm = math.sqrt(abs(float(w @ (sys.M @ w))))
        if not math.isfinite(norm) or norm > DIVERGENCE_LIMIT:
            status = "diverged"
            break
        record(i + 1, w)
    return EvolutionRecord(times, w_max, norms, d_norms, status, w, states)


@dataclass
class StabilityReport:
    min_eig_d: float
    estimate_held: bool | None = None
    random_monotone: bool | None = None
    max_ratio: float | None = None


def verify_stability_operator(sys: FemSystem, cfg: SchemeConfig, record: EvolutionRecord | None = None,
                              load: np.ndarray | None = None, n_random: int = 0, n_levels: int = 100,
                              seed: int = 0, rtol: float = 1e-10) -> StabilityReport:
    """Check D >= I and the level-wise D-norm estimate.

    With ``record`` (run with ``keep_states=True`` and fixed ``load``) the
    estimate ||w^{n+1}||_D <= ||w^n||_D + tau ||psi^{n+1}||_{D^-1} is checked
    at every level.  With ``n_random`` > 0, that many random initial vectors
    are advanced ``n_levels`` levels with zero source on the dense path and
    the D-norm must never grow by more than a factor 1 + rtol.
    """
    cfg = cfg.resolve(sys)
    stab = stability_matrices(sys, cfg)
    report = StabilityReport(float(np.linalg.eigvalsh(stab.D_modal)[0]))

    if record is not None:
        if not record.states:
            raise ValueError("record was run without keep_states")
        load_vec = assemble_load(sys.mesh, logistic_source(cfg.gamma)) if load is None else load
        psi = l2_project(sys, np.asarray(load_vec, dtype=float))
        slack = cfg.tau * stab.d_inv_norm(psi)
        dn = [float(stab.d_norm(w)) for w in record.states]
        report.estimate_held = all(
            b <= (a + slack) * (1.0 + rtol) for a, b in zip(dn[:-1], dn[1:])
        )

    if n_random > 0:
        rng = np.random.default_rng(seed)
        W = rng.standard_normal((sys.n, n_random))
        zero = np.zeros(sys.n)
        dense = sys.dense_solver
        prev = stab.d_norm(W)
        worst = 0.0
        for _ in range(n_levels):
            W = step_regularized(sys, W, cfg, zero, dense)
            cur = stab.d_norm(W)
            worst = max(worst, float(np.max(cur / prev)))
            prev = cur
        report.max_ratio = worst
        report.random_monotone = worst <= 1.0 + rtol
    return report


def a_priori_bound(sys: FemSystem, cfg: SchemeConfig, load: np.ndarray, w0: np.ndarray | None = None) -> float:
    """Bound on ||w(T)||_M for the exact solution:
    ||w(t)||^2 <= ||w0||^2 + delta^-alpha t ||psi||^2 / 2 for a constant source."""
    cfg = cfg.resolve(sys)
    psi = l2_project(sys, load)
    p2 = float(psi @ (sys.M @ psi))
    w2 = 0.0 if w0 is None else float(w0 @ (sys.M @ w0))
    return math.sqrt(w2 + 0.5 * cfg.delta ** (-cfg.alpha) * cfg.final_time * p2)
