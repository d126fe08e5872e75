"""Static condensation of the interior unknowns onto the skeleton.

Per cell the local system is split as::

    [A00 A0b] [u0]   [F0]
    [Ab0 Abb] [ub] = [ 0]

Eliminating ``u0 = A00^{-1} (F0 - A0b ub)`` leaves the Schur complement
``Abb - Ab0 A00^{-1} A0b`` acting on ``ub`` with right-hand side
``-Ab0 A00^{-1} F0``. After the global skeleton solve the interior
values are recovered cell by cell from the cached factorizations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (
    DofMap,
    GlobalSystem,
    SolverError,
    WeakFunction,
    _scatter,
    build_dofmap,
    build_local_systems,
)
from .linalg import NotSPDError, cg_solve
from .mesh import Mesh
from .wgcore import LocalSystem

__all__ = [
    "CondensedLocal",
    "CondensedSystem",
    "condense_local",
    "assemble_condensed",
    "recover_interior",
    "solve_condensed",
]


@dataclass
class CondensedLocal:
    """Condensed matrices for a batch of cells.

    ``S`` is the Schur complement on the boundary dofs and ``g`` its load.
    The interior solution is ``u0 = rec_f + rec_b @ ub`` (``rec_f`` is
    ``A00^{-1} F0``, ``rec_b`` is ``-A00^{-1} A0b``).
    """

    S: np.ndarray
    g: np.ndarray
    rec_f: np.ndarray
    rec_b: np.ndarray
    chol: np.ndarray
    cell_ids: np.ndarray | None = None

    def recover(self, ub: np.ndarray) -> np.ndarray:
        return self.rec_f + np.einsum("...ij,...j->...i", self.rec_b, ub)


def _cho_solve(L, B):
    y = np.linalg.solve(L, B)
    return np.linalg.solve(np.swapaxes(L, -1, -2), y)


def condense_local(local: LocalSystem) -> CondensedLocal:
    """Eliminate the interior block of a (batched) local system.

    Raises :class:`~cwgfem.linalg.NotSPDError` naming the first cell whose
    interior block fails to factor.
    """
    n0 = local.layout.n0
    A = local.A
    single = A.ndim == 2
    if single:
        A = A[None]
    F = local.F if not single else local.F[None]
    A00, A0b = A[:, :n0, :n0], A[:, :n0, n0:]
    Ab0, Abb = A[:, n0:, :n0], A[:, n0:, n0:]
    try:
        L = np.linalg.cholesky(A00)
    except np.linalg.LinAlgError:
        bad = 0
        for c in range(len(A00)):
            if np.any(np.linalg.eigvalsh(A00[c]) <= 0):
                bad = c
                break
        cell = local.cell_ids[bad] if local.cell_ids is not None else bad
        raise NotSPDError(f"interior block of cell {cell} is not SPD") from None
    X = _cho_solve(L, np.concatenate([F[:, :n0, None], A0b], axis=2))
    rec_f = X[:, :, 0]
    rec_b = -X[:, :, 1:]
    S = Abb + Ab0 @ rec_b
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    g = F[:, n0:] + np.einsum("cij,cj->ci", Ab0, -rec_f)
    out = CondensedLocal(S, g, rec_f, rec_b, L, local.cell_ids)
    if single:
        out = CondensedLocal(S[0], g[0], rec_f[0], rec_b[0], L[0], None)
    return out


@dataclass
class CondensedSystem(GlobalSystem):
    """Skeleton-only system; ``free`` indexes skeleton dofs (0-based within the skeleton)."""

    condensed: list = None


def assemble_condensed(mesh: Mesh, k: int, a=None, f=None, exactness: int | None = None,
                       stab_length: str = "max-edge") -> CondensedSystem:
    dofmap = build_dofmap(mesh, k)
    locals_ = build_local_systems(mesh, k, a, f, exactness, stab_length)
    condensed = [condense_local(ls) for ls in locals_]
    n0 = dofmap.n0
    skel_dofs = [d[:, n0:] - dofmap.n_interior for d in dofmap.cell_dofs]
    full, rhs = _scatter(skel_dofs, [c.S for c in condensed], [c.g for c in condensed], dofmap.n_skeleton)
    free = np.flatnonzero(~dofmap.boundary[dofmap.skeleton_slice])
    return CondensedSystem(
        dofmap, full.submatrix(free), rhs[free], free, full, rhs, locals_, condensed
    )


def recover_interior(ub: np.ndarray, condensed: list, dofmap: DofMap) -> WeakFunction:
    """Rebuild the full weak function from skeleton values ``ub`` (all skeleton dofs)."""
    values = np.zeros(dofmap.total)
    values[dofmap.skeleton_slice] = ub
    n0 = dofmap.n0
    for dofs, c in zip(dofmap.cell_dofs, condensed):
        u0 = c.recover(values[dofs[:, n0:]])
        values[dofs[:, :n0]] = u0
    return WeakFunction(dofmap, values)


def solve_condensed(system: CondensedSystem, tol: float = 1e-10, max_iter: int | None = None):
    """Skeleton CG solve followed by interior recovery."""
    x, report = cg_solve(system.A, system.b, tol=tol, max_iter=max_iter)
    if not report.converged:
        raise SolverError(
            f"CG did not converge: residual {report.residual:.3e} after {report.iterations} iterations",
            report,
        )
    ub = np.zeros(system.dofmap.n_skeleton)
    ub[system.free] = x
    return recover_interior(ub, system.condensed, system.dofmap), report
