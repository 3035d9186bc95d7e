"""P1 finite element assembly for -div(k grad u) + c u with Robin data
k du/dn + mu u = 0."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .geometry import Mesh
from .linalg import (
    CgConfig,
    DenseSpectral,
    ShiftedSolver,
    csr_from_triplets,
    dense_generalized_eig,
    pcg_solve,
    smallest_eigenpair,
)

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
_EDGE_MASS_REF = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0


@dataclass(frozen=True)
class Coefficients:
    k: float = 1.0
    c: float = 0.0
    mu: float = 1.0

    def __post_init__(self):
        if not all(np.isfinite([self.k, self.c, self.mu])):
            raise ValueError("coefficients must be finite")
        if not self.k > 0:
            raise ValueError("diffusion coefficient k must be positive")
        if self.c < 0:
            raise ValueError("reaction coefficient c must be non-negative")
        if self.mu < 0:
            raise ValueError("Robin coefficient mu must be non-negative")


@dataclass(frozen=True, eq=False)
class FemSystem:
    """Stiffness K (with reaction and Robin terms) and mass M on one mesh.

    The discrete operator is A = M^-1 K.  K and M share a sparsity pattern.
    """

    mesh: Mesh
    coeffs: Coefficients
    K: sp.csr_matrix
    M: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.K.shape[0]

    @cached_property
    def eigenpair(self):
        """Smallest eigenpair of K v = lambda M v, computed once."""
        return smallest_eigenpair(self)

    @property
    def lambda1(self) -> float:
        return self.eigenpair.value

    @cached_property
    def solver(self) -> ShiftedSolver:
        return ShiftedSolver(self.K, self.M)

    @cached_property
    def dense_solver(self) -> ShiftedSolver:
        return ShiftedSolver(self.K, self.M, dense=True)

    @cached_property
    def spectral(self) -> DenseSpectral:
        """Dense generalized eigendecomposition (small meshes only)."""
        return dense_generalized_eig(self)


def local_stiffness(p: np.ndarray) -> np.ndarray:
    """Gradient-product matrices for triangles p of shape (m, 3, 2)."""
    # rows of `g` are area-scaled gradients of the barycentric coordinates
    gx = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]], axis=1)
    gy = np.stack([p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]], axis=1)
    area = 0.5 * np.abs(gy[:, 2] * gx[:, 1] - gy[:, 1] * gx[:, 2])
    return (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :]) / (4.0 * area[:, None, None])


def local_mass(area: np.ndarray) -> np.ndarray:
    return area[:, None, None] * _MASS_REF


def local_edge_mass(length: np.ndarray) -> np.ndarray:
    return length[:, None, None] * _EDGE_MASS_REF


def assemble(mesh: Mesh, coeffs: Coefficients | None = None) -> FemSystem:
    coeffs = coeffs or Coefficients()
    n = mesh.n_nodes
    tris = mesh.triangles
    area = mesh.areas()
    if np.any(area <= 1e-14):
        raise ValueError("degenerate triangle in assembly")

    # coefficients are evaluated per triangle / per edge
    k = np.full(len(tris), coeffs.k)
    c = np.full(len(tris), coeffs.c)
    mu = np.full(len(mesh.boundary_edges), coeffs.mu)

    p = mesh.nodes[tris]
    mass = local_mass(area)
    stiff = k[:, None, None] * local_stiffness(p) + c[:, None, None] * mass

    e = mesh.boundary_edges
    length = np.linalg.norm(mesh.nodes[e[:, 0]] - mesh.nodes[e[:, 1]], axis=1)
    robin = mu[:, None, None] * local_edge_mass(length)

    rows = np.concatenate([np.repeat(tris, 3, axis=1).ravel(), np.repeat(e, 2, axis=1).ravel()])
    cols = np.concatenate([np.tile(tris, 3).ravel(), np.tile(e, 2).ravel()])
    kvals = np.concatenate([stiff.ravel(), robin.ravel()])
    mvals = np.concatenate([mass.ravel(), np.zeros(robin.size)])
    K = csr_from_triplets(rows, cols, kvals, n)
    M = csr_from_triplets(rows, cols, mvals, n)
    return FemSystem(mesh, coeffs, K, M)


def assemble_load(mesh: Mesh, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """b_i = integral of f * chi_i, by the edge-midpoint rule on each triangle.

    ``f(x, y)`` must accept coordinate arrays.
    """
    tris = mesh.triangles
    area = mesh.areas()
    p = mesh.nodes[tris]
    # mid[:, j] is the midpoint of the edge opposite vertex j
    mid = 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])
    fm = np.asarray(f(mid[..., 0], mid[..., 1]), dtype=float) * np.ones(mid.shape[:2])
    # basis function i is 1/2 at the two midpoints adjacent to vertex i
    local = (area / 6.0)[:, None] * (fm.sum(axis=1, keepdims=True) - fm)
    return np.bincount(tris.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)


def logistic_source(gamma: float) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Right-hand side f = 2 / (1 + exp(gamma (x - y))) of the test problem."""

    def f(x, y):
        z = np.clip(gamma * (np.asarray(x) - np.asarray(y)), -700.0, 700.0)
        return 2.0 / (1.0 + np.exp(z))

    return f


def l2_project(sys: FemSystem, b: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Coefficients psi of the L2 projection: M psi = b."""
    return pcg_solve(sys.M, b, CgConfig(rel_tol=rel_tol))


def m_norm(sys: FemSystem, w: np.ndarray) -> float:
    return math.sqrt(max(float(w @ (sys.M @ w)), 0.0))
