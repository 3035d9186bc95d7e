"""A^-beta w through the pseudo-parabolic Cauchy problem on s in [0, 1].

With G = A - delta I (delta no larger than the smallest eigenvalue of A),

    y(s) = delta^beta (s G + delta I)^-beta y(0),    y(0) = delta^-beta w,

so y(1) = A^-beta w.  y solves (s G + delta I) y' + beta G y = 0, which is
integrated with K uniform steps of backward Euler or Crank-Nicolson.  After
multiplying through by the mass matrix and writing S = K - delta M, each step
is the SPD solve

    Euler: (s_{k+1} S + delta M + eta beta S) (y_{k+1} - y_k) = -eta beta S y_k
    CN:    (s_{k+1/2} S + delta M + eta beta S / 2) (y_{k+1} - y_k) = -eta beta S y_k
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DenseSpectral, ShiftedSolver

STEPPERS = ("euler", "cn")
DELTA_RTOL = 1e-8


@dataclass(frozen=True)
class FracPowConfig:
    beta: float
    delta: float
    steps: int = 10
    stepper: str = "cn"

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.steps < 1:
            raise ValueError("need at least one pseudo-time step")
        if self.stepper not in STEPPERS:
            raise ValueError(f"stepper must be one of {STEPPERS}, got {self.stepper!r}")

    @property
    def eta(self) -> float:
        return 1.0 / self.steps


def _step_coefficient(cfg: FracPowConfig, k: int) -> float:
    """Weight a of S in the left-hand matrix of step k -> k+1."""
    eta, beta = cfg.eta, cfg.beta
    if cfg.stepper == "euler":
        return (k + 1) * eta + eta * beta
    return (k + 0.5) * eta + 0.5 * eta * beta


def check_delta(sys, delta: float) -> None:
    lam1 = sys.lambda1
    if delta > lam1 * (1.0 + DELTA_RTOL):
        raise ValueError(f"delta={delta} exceeds the smallest eigenvalue {lam1}")


def cauchy_states(sys, w: np.ndarray, cfg: FracPowConfig,
                  solver: ShiftedSolver | None = None, validate: bool = True) -> list[np.ndarray]:
    """All pseudo-time levels y_0, ..., y_K for the input ``w``.

    ``w`` may be a single vector or an (n, m) block of independent inputs.
    """
    if validate:
        check_delta(sys, cfg.delta)
    solver = solver or sys.solver
    K, M = sys.K, sys.M
    delta, eta, beta = cfg.delta, cfg.eta, cfg.beta
    y = delta ** (-beta) * np.asarray(w, dtype=float)
    states = [y]
    for k in range(cfg.steps):
        a = _step_coefficient(cfg, k)
        rhs = -eta * beta * (K @ y - delta * (M @ y))
        # a S + delta M = a K + delta (1 - a) M
        y = y + solver.solve(a, delta * (1.0 - a), rhs)
        states.append(y)
    return states


def apply_inv_fracpow(sys, w: np.ndarray, cfg: FracPowConfig,
                      solver: ShiftedSolver | None = None, validate: bool = True) -> np.ndarray:
    """Approximate A^-beta w; the result is Q_K(A) w."""
    return cauchy_states(sys, w, cfg, solver, validate)[-1]


def qk_symbol(lam, cfg: FracPowConfig) -> np.ndarray:
    """Q_K as a scalar function of the eigenvalue, in product form."""
    lam = np.asarray(lam, dtype=float)
    g = lam - cfg.delta
    eta, beta = cfg.eta, cfg.beta
    q = np.full_like(lam, cfg.delta ** (-beta))
    for k in range(cfg.steps):
        if cfg.stepper == "euler":
            s = (k + 1) * eta
            q *= (s * g + cfg.delta) / (s * g + cfg.delta + eta * beta * g)
        else:
            s = (k + 0.5) * eta
            half = 0.5 * eta * beta * g
            q *= (s * g + cfg.delta - half) / (s * g + cfg.delta + half)
    return q


def qk_modal(sys, cfg: FracPowConfig) -> np.ndarray:
    """Matrix of Q_K in the M-orthonormal eigenbasis, V^T M Q_K V.

    Q_K is applied by the stepper itself (dense solves) to every eigenvector.
    """
    spec = sys.spectral
    QV = apply_inv_fracpow(sys, spec.vectors, cfg, sys.dense_solver)
    H = spec.vectors.T @ (spec.M @ QV)
    return 0.5 * (H + H.T)


def qk_spectral_check(sys, cfg: FracPowConfig) -> tuple[float, float]:
    """Extreme eigenvalues of Q_K(A) in the M-inner product."""
    q = np.linalg.eigvalsh(qk_modal(sys, cfg))
    return float(q[0]), float(q[-1])


def oracle_fracpow(spec: DenseSpectral, w: np.ndarray, power: float) -> np.ndarray:
    """A^power w = V diag(lambda^power) V^T M w."""
    return spec.apply(lambda lam: lam ** power, w)


def oracle_cauchy(spec: DenseSpectral, w: np.ndarray, s: float, beta: float, delta: float) -> np.ndarray:
    """Exact pseudo-time state y(s) = (s (A - delta I) + delta I)^-beta w."""
    return spec.apply(lambda lam: (s * (lam - delta) + delta) ** (-beta), w)
