import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from cwgfem.analysis import manufactured_case_1
from cwgfem.assembly import assemble
from cwgfem.linalg import NotSPDError, SparseSymMatrix, cg_solve, dense_solve_spd
from cwgfem.mesh import build_uniform_triangle_mesh


def random_spd(n, seed):
    B = np.random.default_rng(seed).normal(size=(n, n))
    return B.T @ B + np.eye(n)


def test_from_triplets_sums_duplicates():
    A = SparseSymMatrix.from_triplets([0, 0, 1, 1, 0], [0, 1, 0, 1, 0], [1.0, 2.0, 2.0, 5.0, 3.0], 2)
    assert A.todense().tolist() == [[4.0, 2.0], [2.0, 5.0]]
    assert A.nnz == 4 and A.dim == 2
    assert A.indptr.tolist() == [0, 2, 4] and A.indices.tolist() == [0, 1, 0, 1]
    assert A.symmetry_error() == 0.0
    assert np.allclose(A @ np.array([1.0, 1.0]), [6.0, 7.0])


def test_submatrix_and_diag():
    M = random_spd(6, 1)
    A = SparseSymMatrix(sp.csr_array(M))
    idx = np.array([0, 2, 5])
    assert np.allclose(A.submatrix(idx).todense(), M[np.ix_(idx, idx)])
    assert np.allclose(A.diagonal(), np.diag(M))


def test_non_square():
    with pytest.raises(ValueError, match="square"):
        SparseSymMatrix(sp.csr_array(np.ones((2, 3))))


def test_dump(tmp_path):
    A = SparseSymMatrix.from_triplets([0, 1], [1, 0], [0.5, 0.5], 2)
    p = tmp_path / "A.txt"
    A.dump(p)
    assert p.read_text() == "1 2 0.5\n2 1 0.5\n"


def test_dense_solve():
    assert np.allclose(dense_solve_spd(np.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3])
    assert np.allclose(dense_solve_spd([[2.0, 1.0], [1.0, 2.0]], [3.0, 3.0]), [1, 1])
    M = random_spd(8, 2)
    b = np.arange(8.0)
    assert np.linalg.norm(M @ dense_solve_spd(M, b) - b) <= 1e-12 * np.linalg.norm(b)
    with pytest.raises(NotSPDError):
        dense_solve_spd([[1.0, 2.0], [2.0, 1.0]], [1.0, 1.0])


def test_cg_identity_one_iteration():
    A = SparseSymMatrix(sp.eye_array(5, format="csr"))
    x, rep = cg_solve(A, np.arange(1.0, 6.0))
    assert rep.converged and rep.iterations == 1
    assert np.allclose(x, np.arange(1.0, 6.0))


def test_cg_zero_rhs():
    x, rep = cg_solve(np.eye(3) * 2, np.zeros(3))
    assert rep.iterations == 0 and np.all(x == 0)


@given(n=st.integers(1, 40), seed=st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_cg_matches_dense(n, seed):
    M = random_spd(n, seed)
    b = np.random.default_rng(seed + 1).normal(size=n)
    x, rep = cg_solve(SparseSymMatrix(sp.csr_array(M)), b)
    assert rep.converged
    assert np.allclose(x, dense_solve_spd(M, b), rtol=0, atol=1e-9 * max(1, np.abs(x).max()))


def test_cg_example1_system():
    system = assemble(build_uniform_triangle_mesh(8), 1, f=manufactured_case_1().f)
    x, rep = cg_solve(system.A, system.b)
    assert rep.converged and rep.residual <= 1e-10
    assert np.linalg.norm(system.A @ x - system.b) <= 1e-10 * np.linalg.norm(system.b)


def test_cg_iteration_cap():
    M = random_spd(30, 5)
    _, rep = cg_solve(M, np.ones(30), tol=1e-14, max_iter=2)
    assert not rep.converged and rep.iterations == 2


@pytest.mark.parametrize("M", [np.array([[1.0, 2.0], [2.0, 1.0]]), np.array([[1.0, 0.0], [0.0, -1.0]])])
def test_cg_not_spd(M):
    with pytest.raises(NotSPDError):
        cg_solve(M, np.array([1.0, 0.0]))
