"""Manufactured solutions, discrete error norms and convergence studies."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import (
    DofMap,
    WeakFunction,
    assemble,
    build_dofmap,
    build_local_systems,
    solve_full,
)
from .condensation import assemble_condensed, solve_condensed
from .mesh import FamilyKind, Mesh, MeshFamily
from .polyspace import EdgeBasis, default_exactness, gauss_legendre_01, project_Q0, scalar_dim

__all__ = [
    "ManufacturedCase",
    "manufactured_case_1",
    "manufactured_case_2",
    "CASES",
    "get_case",
    "interpolate_weak",
    "energy_error",
    "l2_error",
    "interpolation_error_sq",
    "solve",
    "ConvergenceRow",
    "run_convergence",
    "format_table",
    "rows_to_csv",
    "Scheme",
    "dof_count",
    "dof_table",
]

PI = math.pi


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    u: Callable
    grad_u: Callable
    f: Callable
    a: Callable | None = None  # None means the identity


def manufactured_case_1() -> ManufacturedCase:
    """``u = sin(pi x) sin(pi y)`` with ``a = I``."""
    return ManufacturedCase(
        name="example1",
        u=lambda x, y: np.sin(PI * x) * np.sin(PI * y),
        grad_u=lambda x, y: (
            PI * np.cos(PI * x) * np.sin(PI * y),
            PI * np.sin(PI * x) * np.cos(PI * y),
        ),
        f=lambda x, y: 2 * PI**2 * np.sin(PI * x) * np.sin(PI * y),
    )


def manufactured_case_2() -> ManufacturedCase:
    """``u = x(1-x) y(1-y)`` with ``a = I``."""
    return ManufacturedCase(
        name="example2",
        u=lambda x, y: x * (1 - x) * y * (1 - y),
        grad_u=lambda x, y: ((1 - 2 * x) * y * (1 - y), x * (1 - x) * (1 - 2 * y)),
        f=lambda x, y: 2 * (x * (1 - x) + y * (1 - y)),
    )


CASES = {"example1": manufactured_case_1, "example2": manufactured_case_2}


def get_case(name: str) -> ManufacturedCase:
    try:
        return CASES[name]()
    except KeyError:
        raise ValueError(f"unknown case {name!r}; expected one of {sorted(CASES)}") from None


# -- error norms ----------------------------------------------------------------


def interpolate_weak(u, dofmap: DofMap, exactness: int | None = None) -> WeakFunction:
    """``{Q0 u, Ib u}``: cellwise L2 projection plus nodal skeleton interpolation."""
    mesh, k = dofmap.mesh, dofmap.k
    values = np.zeros(dofmap.total)
    u0 = np.zeros((mesh.n_cells, dofmap.n0))
    for g in mesh.groups:
        u0[g.cell_ids] = project_Q0(u, mesh.vertices[g.vertex_ids], k, exactness)
    values[: dofmap.n_interior] = u0.ravel()
    pts = dofmap.skeleton_points()
    values[dofmap.skeleton_slice] = u(pts[:, 0], pts[:, 1])
    return WeakFunction(dofmap, values)


def energy_error(uh: WeakFunction, case: ManufacturedCase, mesh: Mesh | None = None, k: int | None = None,
                 locals_=None, exactness: int | None = None, stab_length: str = "max-edge") -> float:
    """``sqrt(a_w(e, e))`` for ``e = {Q0 u, Ib u} - uh``.

    ``mesh`` and ``k`` default to those of ``uh``; pass precomputed local
    systems through ``locals_`` to avoid rebuilding them.
    """
    dm = uh.dofmap
    if (mesh is not None and mesh is not dm.mesh) or (k is not None and k != dm.k):
        raise ValueError("mesh/k do not match the weak function's dof map")
    if locals_ is None:
        locals_ = build_local_systems(dm.mesh, dm.k, case.a, None, exactness, stab_length)
    e = interpolate_weak(case.u, dm, exactness).values - uh.values
    total = 0.0
    for dofs, ls in zip(dm.cell_dofs, locals_):
        ec = e[dofs]
        total += np.einsum("ci,cij,cj->", ec, ls.A, ec)
    return math.sqrt(max(total, 0.0))


def l2_error(uh: WeakFunction, case: ManufacturedCase, mesh: Mesh | None = None, k: int | None = None,
             exactness: int | None = None) -> float:
    """``||Q0 u - u0||`` summed over cells."""
    from .polyspace import mass_matrix

    dm = uh.dofmap
    mesh = dm.mesh
    total = 0.0
    for g in mesh.groups:
        verts = mesh.vertices[g.vertex_ids]
        d = project_Q0(case.u, verts, dm.k, exactness) - uh.u0[g.cell_ids]
        M = mass_matrix(verts, dm.k, exactness)
        total += np.einsum("ci,cij,cj->", d, M, d)
    return math.sqrt(max(total, 0.0))


def interpolation_error_sq(w, mesh: Mesh, k: int, exactness: int | None = None) -> float:
    """``sum_T ||w - Ib w||^2`` over each cell boundary (interior edges count twice)."""
    q = exactness or default_exactness(k) + 4
    t, wt = gauss_legendre_01(q)
    basis = EdgeBasis(k)
    lam = basis.values(t)
    seg = mesh.vertices[mesh.edges]
    nodes = basis.node_points(seg)
    nodal = w(nodes[..., 0], nodes[..., 1])
    pts = seg[:, None, 0, :] + (seg[:, 1, :] - seg[:, 0, :])[:, None, :] * t[:, None]
    length = np.linalg.norm(seg[:, 1] - seg[:, 0], axis=-1)
    diff = w(pts[..., 0], pts[..., 1]) - nodal @ lam.T
    per_edge = length * (diff**2 @ wt)
    multiplicity = np.where(mesh.boundary_edges, 1, 2)
    return float(np.sum(multiplicity * per_edge))


# -- solving --------------------------------------------------------------------


def solve(mesh: Mesh, k: int, case: ManufacturedCase, path: str = "schur", tol: float = 1e-10,
          exactness: int | None = None, stab_length: str = "max-edge"):
    """Solve the WG problem for ``case`` on ``mesh``.

    Returns ``(uh, report, system)``; ``system`` is the assembled (full or
    condensed) system, whose ``locals`` can be reused for error evaluation.
    """
    if path == "full":
        system = assemble(mesh, k, case.a, case.f, exactness, stab_length)
        uh, report = solve_full(system, tol)
    elif path == "schur":
        system = assemble_condensed(mesh, k, case.a, case.f, exactness, stab_length)
        uh, report = solve_condensed(system, tol)
    else:
        raise ValueError(f"path must be 'full' or 'schur', got {path!r}")
    return uh, report, system


@dataclass
class ConvergenceRow:
    h: float
    dof: int
    energy_error: float
    l2_error: float
    energy_rate: float | None = None
    l2_rate: float | None = None
    n: int | None = None


def run_convergence(case: ManufacturedCase, family, k: int, levels, path: str = "schur",
                    tol: float = 1e-10, exactness: int | None = None, jitter: float = 0.2,
                    seed: int = 0, stab_length: str = "max-edge") -> list[ConvergenceRow]:
    """Solve on successively refined meshes and tabulate errors and rates.

    ``h`` is reported as ``1 / n`` to match the generated family; rates are
    ``log2`` of successive error ratios scaled by the actual ``h`` ratio.
    """
    kind = FamilyKind.parse(family)
    levels = [int(n) for n in levels]
    if not levels:
        raise ValueError("levels must be non-empty")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    rows: list[ConvergenceRow] = []
    for n in levels:
        mesh = MeshFamily(kind, n, jitter=jitter, seed=seed).build()
        uh, _, system = solve(mesh, k, case, path, tol, exactness, stab_length)
        row = ConvergenceRow(
            h=1.0 / n,
            dof=uh.dofmap.total,
            energy_error=energy_error(uh, case, locals_=system.locals, exactness=exactness),
            l2_error=l2_error(uh, case, exactness=exactness),
            n=n,
        )
        if rows:
            prev = rows[-1]
            ratio = math.log(prev.h / row.h)
            row.energy_rate = math.log(prev.energy_error / row.energy_error) / ratio
            row.l2_rate = math.log(prev.l2_error / row.l2_error) / ratio
        rows.append(row)
    return rows


def _h_label(h: float) -> str:
    n = round(1.0 / h)
    return f"1/{n}" if abs(n * h - 1.0) < 1e-12 else f"{h:.4g}"


def format_table(rows: list[ConvergenceRow]) -> str:
    """Aligned plain-text table: h, dof, energy error, order, L2 error, order."""
    head = ["h", "dof", "|||Qu-uh|||", "order", "||Q0u-u0||", "order"]
    body = [
        [
            _h_label(r.h),
            str(r.dof),
            f"{r.energy_error:.4e}",
            "" if r.energy_rate is None else f"{r.energy_rate:.4f}",
            f"{r.l2_error:.4e}",
            "" if r.l2_rate is None else f"{r.l2_rate:.4f}",
        ]
        for r in rows
    ]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in [head] + body]
    return "\n".join(lines)


def rows_to_csv(rows: list[ConvergenceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["h", "dof", "energy_error", "energy_rate", "l2_error", "l2_rate"])
    for r in rows:
        w.writerow([
            repr(r.h),
            r.dof,
            f"{r.energy_error:.10e}",
            "" if r.energy_rate is None else f"{r.energy_rate:.6f}",
            f"{r.l2_error:.10e}",
            "" if r.l2_rate is None else f"{r.l2_rate:.6f}",
        ])
    return buf.getvalue()


# -- degree-of-freedom counts ---------------------------------------------------


class Scheme(str, enum.Enum):
    WG = "WG"
    CWG = "CWG"
    WG_SCHUR = "WG-Schur"
    CWG_SCHUR = "CWG-Schur"
    CG = "CG"


def dof_count(scheme, family, n: int, k: int = 1) -> int:
    """Closed-form dof counts on the generated unit-square families.

    ``WG`` is the classical weak Galerkin scheme with P1 interiors and P0
    edge values, ``CG`` the conforming P1/Q1 method; both only for k = 1.
    Boundary dofs are included throughout.
    """
    scheme = Scheme(scheme)
    nc, nv, ne = MeshFamily(FamilyKind.parse(family), n).expected_counts()
    if scheme is Scheme.CWG:
        return nc * scalar_dim(k) + nv + (k - 1) * ne
    if scheme is Scheme.CWG_SCHUR:
        return nv + (k - 1) * ne
    if k != 1:
        raise ValueError(f"dof count for scheme {scheme.value} is only defined for k=1, got k={k}")
    if scheme is Scheme.WG:
        return 3 * nc + ne
    if scheme is Scheme.WG_SCHUR:
        return ne
    return nv


def dof_table(levels, k: int = 1, family="tri", schemes=None) -> list[dict]:
    """Rows of ``{"n": n, scheme: count, ...}``; ``schemes`` defaults to all of them."""
    schemes = list(Scheme) if schemes is None else [Scheme(s) for s in schemes]
    return [{"n": n, **{s.value: dof_count(s, family, n, k) for s in schemes}} for n in levels]
