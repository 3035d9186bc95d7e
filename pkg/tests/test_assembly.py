import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from fracdiff.assembly import (
    Coefficients, FemSystem, assemble, assemble_load, l2_project, local_edge_mass, local_mass,
    local_stiffness, logistic_source, m_norm,
)
from fracdiff.geometry import Mesh, boundary_length

UNIT = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@pytest.fixture(scope="module")
def unit_mesh():
    return Mesh(UNIT, np.array([[0, 1, 2]]), np.array([[0, 1], [1, 2], [2, 0]]))


def test_local_stiffness_unit_triangle():
    expected = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    assert np.allclose(local_stiffness(UNIT[None])[0], expected, atol=1e-15)


def test_local_mass_unit_triangle():
    expected = 0.5 / 12 * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2.0]])
    assert np.allclose(local_mass(np.array([0.5]))[0], expected, atol=1e-16)


def test_local_edge_mass():
    L = 0.3
    assert np.allclose(local_edge_mass(np.array([L]))[0], L / 6 * np.array([[2, 1], [1, 2.0]]))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.floats(-2, 2), st.floats(-2, 2))
def test_stiffness_invariances(coords, a, b):
    p = np.array(coords).reshape(3, 2)
    cross = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
    if abs(cross) < 1e-2:
        return
    S = local_stiffness(p[None])[0]
    assert np.allclose(S, S.T)
    assert np.allclose(S.sum(axis=1), 0.0, atol=1e-9 * np.abs(S).max())
    # translation and orientation do not matter
    assert np.allclose(local_stiffness((p + [a, b])[None])[0], S)
    assert np.allclose(local_stiffness(p[[0, 2, 1]][None])[0], S[np.ix_([0, 2, 1], [0, 2, 1])])
    assert np.all(np.linalg.eigvalsh(S) >= -1e-9 * np.abs(S).max())


def test_single_triangle_assembly(unit_mesh):
    sys = assemble(unit_mesh, Coefficients(k=1.0, c=0.0, mu=0.0))
    assert np.allclose(sys.K.toarray(), local_stiffness(UNIT[None])[0])
    assert np.allclose(sys.M.toarray(), local_mass(np.array([0.5]))[0])


def test_global_matrices(small_sys, small_mesh):
    K, M = small_sys.K, small_sys.M
    assert (K != K.T).nnz == 0 and (M != M.T).nnz == 0
    assert M.sum() == pytest.approx(small_mesh.area(), rel=1e-13)
    # constants: K 1 = Robin boundary mass, so 1^T K 1 = mu |boundary of mesh|
    ones = np.ones(small_sys.n)
    perim = np.linalg.norm(np.diff(small_mesh.nodes[small_mesh.boundary_edges], axis=1), axis=2).sum()
    assert ones @ (K @ ones) == pytest.approx(10.0 * perim, rel=1e-12)
    assert perim == pytest.approx(boundary_length(), rel=1e-2)
    assert np.array_equal(K.indptr, M.indptr) and np.array_equal(K.indices, M.indices)
    assert np.linalg.eigvalsh(K.toarray())[0] > 0


def test_pure_neumann_has_constant_nullspace(small_mesh):
    sys = assemble(small_mesh, Coefficients(mu=0.0))
    assert np.abs(sys.K @ np.ones(sys.n)).max() < 1e-12


def test_assembly_is_deterministic(small_mesh):
    a = assemble(small_mesh, Coefficients(mu=3.0))
    b = assemble(small_mesh, Coefficients(mu=3.0))
    assert np.array_equal(a.K.data, b.K.data) and np.array_equal(a.M.data, b.M.data)


@pytest.mark.parametrize("kw", [dict(k=0.0), dict(k=-1.0), dict(c=-1.0), dict(mu=-0.5), dict(mu=float("nan"))])
def test_coefficients_validated(kw):
    with pytest.raises(ValueError):
        Coefficients(**kw)


def test_load_partition_of_unity(small_mesh):
    b = assemble_load(small_mesh, lambda x, y: np.ones_like(x))
    assert abs(b.sum() - small_mesh.area()) / small_mesh.area() <= 1e-13
    b0 = assemble_load(small_mesh, logistic_source(0.0))
    assert np.array_equal(b, b0)


def test_load_linear_field_unit_triangle(unit_mesh):
    b = assemble_load(unit_mesh, lambda x, y: x)
    assert np.allclose(b, [1 / 24, 1 / 12, 1 / 24], atol=1e-16)


def test_load_linear_field_any_triangle(small_mesh):
    # f chi_i is quadratic, so the midpoint rule reproduces M f_nodal exactly
    from fracdiff.assembly import assemble as _assemble
    sys = _assemble(small_mesh)
    x, y = small_mesh.nodes.T
    b = assemble_load(small_mesh, lambda x, y: 2 * x - 3 * y + 1)
    assert np.allclose(b, sys.M @ (2 * x - 3 * y + 1), rtol=0, atol=1e-15)


def test_logistic_source_is_finite_for_steep_gamma():
    f = logistic_source(1e6)
    v = f(np.array([0.0, 1.0, 0.5]), np.array([1.0, 0.0, 0.5]))
    assert np.allclose(v, [2.0, 0.0, 1.0])


def test_l2_project(small_sys, small_mesh):
    ones = l2_project(small_sys, assemble_load(small_mesh, logistic_source(0.0)))
    assert np.abs(ones - 1).max() <= 1e-10
    assert np.array_equal(l2_project(small_sys, np.zeros(small_sys.n)), np.zeros(small_sys.n))
    assert m_norm(small_sys, ones) == pytest.approx(np.sqrt(small_mesh.area()), rel=1e-10)


def test_fem_system_caches(small_sys):
    assert small_sys.solver is small_sys.solver
    assert small_sys.lambda1 == small_sys.eigenpair.value
    assert isinstance(small_sys.K, sp.csr_matrix)


def test_l2_project_steep_source_range():
    # the front of the gamma = 100 source is ~0.01 wide; on the finest
    # calibrated grid the projection stays within [-0.1, 2.1]
    from fracdiff.geometry import reference_grid
    sys = assemble(reference_grid(3), Coefficients(mu=10.0))
    psi = l2_project(sys, assemble_load(sys.mesh, logistic_source(100.0)))
    assert psi.min() >= -0.1 and psi.max() <= 2.1
