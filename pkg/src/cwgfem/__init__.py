"""Continuous-skeleton weak Galerkin finite elements for -div(a grad u) = f on polygonal meshes."""

from .analysis import (
    ConvergenceRow,
    ManufacturedCase,
    Scheme,
    dof_count,
    dof_table,
    energy_error,
    get_case,
    l2_error,
    run_convergence,
    solve,
)
from .assembly import DofMap, SolverError, WeakFunction, assemble, build_dofmap, solve_full
from .condensation import assemble_condensed, condense_local, solve_condensed
from .linalg import NotSPDError, SolverReport, SparseSymMatrix, cg_solve
from .mesh import (
    FamilyKind,
    Mesh,
    MeshError,
    MeshFamily,
    build_perturbed_triangle_mesh,
    build_uniform_rectangle_mesh,
    build_uniform_triangle_mesh,
    load_mesh,
    save_mesh,
)
from .wgcore import local_system, weak_gradient_matrix

__version__ = "0.1.0"
