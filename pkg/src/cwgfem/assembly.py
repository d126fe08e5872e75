"""Global numbering, sparse assembly and the full (uncondensed) solve.

Global dofs are ordered as: interior coefficients cell by cell, then one
value per mesh vertex, then ``k - 1`` values per edge at its interior
nodes, listed from the lower-numbered endpoint towards the higher one.
The skeleton part is therefore continuous by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import SolverReport, SparseSymMatrix, cg_solve
from .mesh import Mesh
from .polyspace import EdgeBasis, scalar_dim
from .wgcore import LocalSystem, local_system

__all__ = [
    "SolverError",
    "DofMap",
    "WeakFunction",
    "GlobalSystem",
    "build_dofmap",
    "build_local_systems",
    "assemble",
    "solve_full",
]


class SolverError(RuntimeError):
    def __init__(self, message, report: SolverReport | None = None):
        super().__init__(message)
        self.report = report


@dataclass
class DofMap:
    mesh: Mesh
    k: int
    n_interior: int
    n_skeleton: int
    boundary: np.ndarray  # bool over all dofs, True on skeleton dofs lying on the domain boundary
    cell_dofs: list  # per cell group: (nc, n0 + nb) global indices

    @property
    def n0(self) -> int:
        return scalar_dim(self.k)

    @property
    def total(self) -> int:
        return self.n_interior + self.n_skeleton

    @property
    def skeleton_slice(self) -> slice:
        return slice(self.n_interior, self.total)

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    def skeleton_points(self) -> np.ndarray:
        """Coordinates of the skeleton dofs, ``(n_skeleton, 2)``."""
        mesh, k = self.mesh, self.k
        pts = [mesh.vertices]
        if k > 1:
            seg = mesh.vertices[mesh.edges]  # (ne, 2, 2)
            nodes = EdgeBasis(k).node_points(seg)[:, 1:k]
            pts.append(nodes.reshape(-1, 2))
        return np.concatenate(pts)


def build_dofmap(mesh: Mesh, k: int) -> DofMap:
    if k < 1:
        raise ValueError(f"polynomial degree k must be >= 1, got {k}")
    n0 = scalar_dim(k)
    n_int = mesh.n_cells * n0
    nv, ne = mesh.n_vertices, mesh.n_edges
    n_skel = nv + (k - 1) * ne

    cell_dofs = []
    for g in mesh.groups:
        m = g.nverts
        interior = g.cell_ids[:, None] * n0 + np.arange(n0)
        verts = n_int + g.vertex_ids
        j = np.arange(k - 1)
        # interior edge nodes in cell-local direction
        local = np.where(g.edge_flip[..., None], k - 2 - j, j)
        enodes = n_int + nv + g.edge_ids[..., None] * (k - 1) + local
        cell_dofs.append(
            np.concatenate([interior, verts, enodes.reshape(len(g), m * (k - 1))], axis=1)
        )

    boundary = np.zeros(n_int + n_skel, dtype=bool)
    boundary[n_int:n_int + nv] = mesh.boundary_vertices
    bedges = np.flatnonzero(mesh.boundary_edges)
    if k > 1:
        boundary[(n_int + nv + bedges[:, None] * (k - 1) + np.arange(k - 1)).ravel()] = True
    return DofMap(mesh, k, n_int, n_skel, boundary, cell_dofs)


@dataclass
class WeakFunction:
    """Global coefficient vector of a weak function ``{v0, vb}``."""

    dofmap: DofMap
    values: np.ndarray

    @property
    def u0(self) -> np.ndarray:
        """Interior coefficients, ``(n_cells, n0)``."""
        return self.values[: self.dofmap.n_interior].reshape(-1, self.dofmap.n0)

    @property
    def ub(self) -> np.ndarray:
        return self.values[self.dofmap.skeleton_slice]


def build_local_systems(mesh: Mesh, k: int, a=None, f=None, exactness: int | None = None,
                        stab_length: str = "max-edge") -> list:
    """One batched :class:`LocalSystem` per cell group of ``mesh``."""
    out = []
    for g in mesh.groups:
        ls = local_system(mesh.vertices[g.vertex_ids], k, a=a, f=f, exactness=exactness,
                          stab_length=stab_length)
        ls.cell_ids = g.cell_ids
        out.append(ls)
    return out


@dataclass
class GlobalSystem:
    """Assembled system restricted to free dofs.

    ``full`` is the unconstrained matrix over every dof (handy for tests);
    ``A`` and ``b`` act on the dofs listed in ``free``.
    """

    dofmap: DofMap
    A: SparseSymMatrix
    b: np.ndarray
    free: np.ndarray
    full: SparseSymMatrix
    full_rhs: np.ndarray
    locals: list = field(default_factory=list)


def _scatter(dof_blocks, mats, vecs, n):
    rows, cols, vals = [], [], []
    rhs = np.zeros(n)
    for dofs, M, F in zip(dof_blocks, mats, vecs):
        nl = dofs.shape[1]
        rows.append(np.repeat(dofs, nl, axis=1).ravel())
        cols.append(np.tile(dofs, (1, nl)).ravel())
        vals.append(M.reshape(len(dofs), -1).ravel())
        np.add.at(rhs, dofs.ravel(), F.ravel())
    mat = SparseSymMatrix.from_triplets(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), n
    )
    return mat, rhs


def assemble(mesh: Mesh, k: int, a=None, f=None, exactness: int | None = None,
             stab_length: str = "max-edge") -> GlobalSystem:
    """Assemble ``a_w(u, v) = (f, v0)`` and eliminate boundary skeleton dofs."""
    dofmap = build_dofmap(mesh, k)
    locals_ = build_local_systems(mesh, k, a, f, exactness, stab_length)
    full, rhs = _scatter(dofmap.cell_dofs, [ls.A for ls in locals_], [ls.F for ls in locals_], dofmap.total)
    free = dofmap.free
    return GlobalSystem(dofmap, full.submatrix(free), rhs[free], free, full, rhs, locals_)


def solve_full(system: GlobalSystem, tol: float = 1e-10, max_iter: int | None = None):
    """Solve the assembled system by CG; boundary skeleton values are zero.

    Returns the :class:`WeakFunction` and the :class:`SolverReport`.
    Raises :class:`SolverError` when CG does not converge.
    """
    x, report = cg_solve(system.A, system.b, tol=tol, max_iter=max_iter)
    if not report.converged:
        raise SolverError(
            f"CG did not converge: residual {report.residual:.3e} after {report.iterations} iterations",
            report,
        )
    values = np.zeros(system.dofmap.total)
    values[system.free] = x
    return WeakFunction(system.dofmap, values), report
