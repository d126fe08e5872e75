import numpy as np
import pytest

from cwgfem.analysis import energy_error, l2_error, manufactured_case_1
from cwgfem.assembly import assemble, solve_full
from cwgfem.condensation import assemble_condensed, condense_local, recover_interior, solve_condensed
from cwgfem.linalg import NotSPDError
from cwgfem.mesh import MeshFamily, build_uniform_triangle_mesh
from cwgfem.wgcore import local_system

from conftest import PENTAGON, REF_TRIANGLE, UNIT_SQUARE


@pytest.mark.parametrize("verts", [REF_TRIANGLE, UNIT_SQUARE, PENTAGON])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_schur_against_dense(verts, k):
    ls = local_system(verts, k, f=lambda x, y: np.sin(x) + y)
    c = condense_local(ls)
    n0 = ls.layout.n0
    A, F = ls.A, ls.F
    S_ref = A[n0:, n0:] - A[n0:, :n0] @ np.linalg.solve(A[:n0, :n0], A[:n0, n0:])
    g_ref = -A[n0:, :n0] @ np.linalg.solve(A[:n0, :n0], F[:n0])
    assert np.allclose(c.S, S_ref, atol=1e-10)
    assert np.allclose(c.g, g_ref, atol=1e-12)


def test_constant_trace_recovers_constant():
    ls = local_system(REF_TRIANGLE, 1)
    c = condense_local(ls)
    u0 = c.recover(np.full(ls.layout.nb, 2.5))
    assert np.allclose(u0, [2.5, 0, 0], atol=1e-12)
    assert np.abs(c.S.sum(axis=1)).max() <= 1e-12
    assert np.allclose(c.recover(np.zeros(ls.layout.nb)), 0)


def test_bad_interior_block_names_cell():
    ls = local_system(np.stack([REF_TRIANGLE, REF_TRIANGLE]), 1)
    ls.K[1, 0, 0] = -100.0
    ls.cell_ids = np.array([7, 42])
    with pytest.raises(NotSPDError, match="cell 42"):
        condense_local(ls)


@pytest.mark.parametrize("n, expected", [(8, 81), (64, 4225)])
def test_skeleton_size(n, expected):
    system = assemble_condensed(build_uniform_triangle_mesh(n), 1)
    assert system.dofmap.n_skeleton == expected
    assert system.full.dim == expected
    assert system.full.symmetry_error() <= 1e-12


def test_zero_load():
    system = assemble_condensed(build_uniform_triangle_mesh(4), 2)
    uh, _ = solve_condensed(system)
    assert np.all(uh.values == 0)
    ub = np.zeros(system.dofmap.n_skeleton)
    assert np.all(recover_interior(ub, system.condensed, system.dofmap).values == 0)


@pytest.mark.parametrize("kind", ["tri", "rect", "perturbed"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_paths_agree(kind, k):
    mesh = MeshFamily(kind, 4).build()
    f = manufactured_case_1().f
    tol = 1e-10 if k < 3 else 1e-13  # cond(A) grows to ~1e7 at k = 3
    a, _ = solve_full(assemble(mesh, k, f=f), tol=tol)
    b, _ = solve_condensed(assemble_condensed(mesh, k, f=f), tol=tol)
    assert np.abs(a.values - b.values).max() <= 1e-8


def test_path_errors_agree_n16():
    case = manufactured_case_1()
    mesh = build_uniform_triangle_mesh(16)
    a, _ = solve_full(assemble(mesh, 1, f=case.f))
    b, _ = solve_condensed(assemble_condensed(mesh, 1, f=case.f))
    assert abs(l2_error(a, case) - l2_error(b, case)) <= 1e-9
    assert abs(energy_error(a, case) - energy_error(b, case)) <= 1e-9
