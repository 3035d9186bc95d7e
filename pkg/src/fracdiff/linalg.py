"""Sparse storage, Jacobi-preconditioned CG, inverse iteration and the dense
generalized eigensolver used as a verification oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

DENSE_MAX_N = 600


class NonConvergence(RuntimeError):
    """An iterative method hit its iteration cap."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class CgConfig:
    rel_tol: float = 1e-10
    max_iter: int | None = None  # None means 10 * n

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")


def csr_from_triplets(rows, cols, vals, n: int) -> sp.csr_matrix:
    """Sum duplicate (row, col) entries in input order and build a CSR matrix.

    Duplicates are accumulated sequentially in the order given, so entries
    (i, j) and (j, i) fed from the same symmetric local matrices come out
    bit-identical.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    keys, inverse = np.unique(rows * n + cols, return_inverse=True)
    data = np.bincount(inverse, weights=vals, minlength=len(keys))
    indptr = np.searchsorted(keys // n, np.arange(n + 1))
    return sp.csr_matrix((data, keys % n, indptr), shape=(n, n))


def is_symmetric(A: sp.spmatrix, tol: float = 1e-13) -> bool:
    diff = abs(A - A.T)
    scale = max(abs(A).max(), 1.0) if A.nnz else 1.0
    return diff.nnz == 0 or diff.max() <= tol * scale


def spmv(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """y = A x, rows accumulated left to right (scipy's csr kernel is sequential)."""
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape}, vector {x.shape}")
    return A @ x


def pcg_solve(A, b, cfg: CgConfig | None = None, x0=None, diag=None,
              return_iterations: bool = False):
    """Conjugate gradients with diagonal (Jacobi) preconditioning.

    Stops once ||A x - b||_2 <= rel_tol * ||b||_2, measured on the true
    residual.  Raises NonConvergence after ``max_iter`` iterations.
    """
    cfg = cfg or CgConfig()
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, rhs {b.shape}")
    max_iter = cfg.max_iter if cfg.max_iter is not None else 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x = np.zeros(n)
        return (x, 0) if return_iterations else x

    dinv = 1.0 / (A.diagonal() if diag is None else diag)
    target = cfg.rel_tol * bnorm
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    it = 0
    while True:
        z = dinv * r
        p = z.copy()
        rz = r @ z
        while np.linalg.norm(r) > target and it < max_iter:
            q = A @ p
            step = rz / (p @ q)
            x += step * p
            r -= step * q
            z = dinv * r
            rz_new = r @ z
            p *= rz_new / rz
            p += z
            rz = rz_new
            it += 1
        # guard against drift of the recursive residual
        r = b - A @ x
        res = np.linalg.norm(r)
        if res <= target:
            break
        if it >= max_iter:
            raise NonConvergence("pcg did not converge", res / bnorm, it)
    return (x, it) if return_iterations else x


class ShiftedSolver:
    """Solves (a K + b M) x = r for SPD combinations of two fixed matrices.

    Combined matrices (and their factorizations on the dense path) are
    cached per (a, b), so the pseudo-time and time-level systems that repeat
    from one call to the next are set up once.
    """

    def __init__(self, K, M, cfg: CgConfig | None = None, dense: bool = False):
        self.K, self.M = K.tocsr(), M.tocsr()
        self.cfg = cfg or CgConfig()
        self.dense = dense
        self._same_pattern = (
            np.array_equal(self.K.indptr, self.M.indptr)
            and np.array_equal(self.K.indices, self.M.indices)
        )
        self._cache: dict = {}
        if dense and K.shape[0] > DENSE_MAX_N:
            raise ValueError(f"dense path limited to n <= {DENSE_MAX_N}")

    def matrix(self, a: float, b: float) -> sp.csr_matrix:
        if self._same_pattern:
            return sp.csr_matrix((a * self.K.data + b * self.M.data,
                                  self.K.indices, self.K.indptr), shape=self.K.shape)
        return (a * self.K + b * self.M).tocsr()

    def _entry(self, a, b):
        key = (float(a), float(b))
        hit = self._cache.get(key)
        if hit is None:
            A = self.matrix(a, b)
            hit = sla.cho_factor(A.toarray()) if self.dense else (A, A.diagonal())
            self._cache[key] = hit
        return hit

    def solve(self, a: float, b: float, rhs: np.ndarray) -> np.ndarray:
        entry = self._entry(a, b)
        if self.dense:
            return sla.cho_solve(entry, rhs)
        A, diag = entry
        if rhs.ndim == 1:
            return pcg_solve(A, rhs, self.cfg, diag=diag)
        return np.column_stack([pcg_solve(A, r, self.cfg, diag=diag) for r in rhs.T])


class Eigenpair(NamedTuple):
    value: float
    vector: np.ndarray
    iterations: int


def smallest_eigenpair(sys, tol: float = 1e-10, max_iter: int = 500, v0=None) -> Eigenpair:
    """Inverse iteration for the smallest eigenvalue of K v = lambda M v.

    ``sys`` is anything with ``K`` and ``M`` attributes.  The default start
    vector is all ones.  Returns the Rayleigh quotient and the M-normalized
    eigenvector.
    """
    K, M = sys.K, sys.M
    n = K.shape[0]
    inner = CgConfig(rel_tol=1e-12, max_iter=20 * n)
    diag = K.diagonal()
    v = np.ones(n) if v0 is None else np.array(v0, dtype=float)
    v /= math.sqrt(v @ (M @ v))
    lam = v @ (K @ v)
    x = None
    for it in range(1, max_iter + 1):
        x = pcg_solve(K, M @ v, inner, x0=x, diag=diag)
        v = x / math.sqrt(x @ (M @ x))
        lam_new = v @ (K @ v)
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return Eigenpair(float(lam_new), v, it)
        lam = lam_new
        # warm start: K^-1 M v is close to v / lambda
        x = v / lam
    raise NonConvergence("inverse iteration did not converge", abs(lam_new - lam) / abs(lam), max_iter)


def _round_robin(m: int):
    """Pairings of 0..m-1 (m even) such that every pair meets once per sweep."""
    players = list(range(m))
    half = m // 2
    for _ in range(m - 1):
        yield players[:half], players[half:][::-1]
        players = [players[0], players[-1]] + players[1:-1]


def _off_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def jacobi_eigh(A: np.ndarray, tol: float = 1e-12, max_sweeps: int = 60):
    """Cyclic Jacobi eigensolver for a dense symmetric matrix.

    Uses the round-robin ordering, where each round rotates n/2 disjoint
    index pairs at once.  Stops when the off-diagonal Frobenius norm drops
    to ``tol * ||A||_F``.  Returns ascending eigenvalues and orthonormal
    eigenvectors (columns).
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return A.diagonal().copy(), V
    fro = np.linalg.norm(A)
    m = n + n % 2
    for _ in range(max_sweeps):
        off = _off_norm(A)
        if off <= tol * fro:
            break
        for top, bottom in _round_robin(m):
            p = np.array(top)
            q = np.array(bottom)
            keep = (p < n) & (q < n)
            p, q = p[keep], q[keep]
            apq = A[p, q]
            rotate = apq != 0.0
            if not rotate.any():
                continue
            p, q, apq = p[rotate], q[rotate], apq[rotate]
            with np.errstate(over="ignore"):
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            Ap, Aq = A[:, p], A[:, q]
            A[:, p], A[:, q] = c * Ap - s * Aq, s * Ap + c * Aq
            Ap, Aq = A[p, :], A[q, :]
            A[p, :], A[q, :] = c[:, None] * Ap - s[:, None] * Aq, s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p], V[:, q]
            V[:, p], V[:, q] = c * Vp - s * Vq, s * Vp + c * Vq
    else:
        off = _off_norm(A)
        if off > tol * fro:
            raise NonConvergence("jacobi sweeps exhausted", off / fro, max_sweeps)
    lam = np.diag(A).copy()
    order = np.argsort(lam, kind="stable")
    return lam[order], V[:, order]


@dataclass(frozen=True)
class DenseSpectral:
    """Full generalized eigendecomposition K V = M V diag(eigenvalues), V^T M V = I."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    M: np.ndarray

    def coefficients(self, w: np.ndarray) -> np.ndarray:
        """Expansion coefficients V^T M w of ``w`` in the eigenbasis."""
        return self.vectors.T @ (self.M @ w)

    def apply(self, fn, w: np.ndarray) -> np.ndarray:
        """fn(A) w for a scalar function ``fn`` of the eigenvalues."""
        c = self.coefficients(w)
        scale = fn(self.eigenvalues)
        return self.vectors @ (scale[:, None] * c if c.ndim == 2 else scale * c)


def dense_generalized_eig(sys, max_n: int = DENSE_MAX_N) -> DenseSpectral:
    """Reduce K v = lambda M v to standard form with M = L L^T and diagonalize
    L^-1 K L^-T by cyclic Jacobi rotations."""
    K = sys.K.toarray() if sp.issparse(sys.K) else np.asarray(sys.K, dtype=float)
    M = sys.M.toarray() if sp.issparse(sys.M) else np.asarray(sys.M, dtype=float)
    n = K.shape[0]
    if n > max_n:
        raise ValueError(f"dense oracle limited to n <= {max_n}, got {n}")
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ValueError("mass matrix is not positive definite") from None
    C = sla.solve_triangular(L, sla.solve_triangular(L, K, lower=True).T, lower=True)
    C = 0.5 * (C + C.T)
    lam, W = jacobi_eigh(C)
    V = sla.solve_triangular(L.T, W, lower=False)
    return DenseSpectral(lam, V, M)
