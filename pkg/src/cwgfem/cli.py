"""Command-line front end.

Subcommands ``solve``, ``convergence``, ``doftable`` and ``meshgen``. Every
option can also come from a flat ``key = value`` file given by ``--config``;
flags given on the command line take precedence over the file.

Exit status is 0 on success, 2 for an invalid configuration and 1 when the
numerical modules report an error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ._fileio import atomic_write_text
from .analysis import (
    CASES,
    Scheme,
    dof_table,
    energy_error,
    format_table,
    get_case,
    l2_error,
    rows_to_csv,
    run_convergence,
    solve,
)
from .assembly import SolverError
from .mesh import FamilyKind, MeshError, MeshFamily, save_mesh
from .wgcore import STAB_LENGTHS

COMMANDS = ("solve", "convergence", "doftable", "meshgen")
PATHS = ("full", "schur")
DEFAULT_LEVELS = (8, 16, 32, 64, 128)


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` names the offending setting."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    command: str
    case: str = "example1"
    family: str = "tri"
    k: int = 1
    n: int = 8
    levels: tuple = DEFAULT_LEVELS
    path: str = "schur"
    quad_order: int | None = None
    tol: float = 1e-10
    out: str | None = None
    seed: int = 0
    jitter: float = 0.2
    stab_length: str = "max-edge"
    extra: dict = field(default_factory=dict, repr=False)

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError("command", f"unknown command {self.command!r}")
        if not 1 <= self.k <= 3:
            raise ConfigError("k", f"must be in [1, 3], got {self.k}")
        if not self.levels:
            raise ConfigError("levels", "must be non-empty")
        if any(n < 1 for n in self.levels):
            raise ConfigError("levels", f"entries must be positive, got {list(self.levels)}")
        if self.n < 1:
            raise ConfigError("n", f"must be positive, got {self.n}")
        if self.path not in PATHS:
            raise ConfigError("path", f"must be one of {PATHS}, got {self.path!r}")
        if self.case not in CASES:
            raise ConfigError("case", f"unknown case {self.case!r}; expected one of {sorted(CASES)}")
        try:
            self.family = FamilyKind.parse(self.family).value
        except ValueError as exc:
            raise ConfigError("family", str(exc)) from None
        if not self.tol > 0:
            raise ConfigError("tol", f"must be positive, got {self.tol}")
        if self.quad_order is not None and self.quad_order < 2 * self.k:
            raise ConfigError("quad_order", f"must be at least 2k = {2 * self.k}, got {self.quad_order}")
        if not 0 <= self.jitter < 0.5:
            raise ConfigError("jitter", f"must lie in [0, 0.5), got {self.jitter}")
        if self.stab_length not in STAB_LENGTHS:
            raise ConfigError("stab_length", f"must be one of {STAB_LENGTHS}, got {self.stab_length!r}")
        if self.extra:
            raise ConfigError(sorted(self.extra)[0], "unknown configuration key")
        return self


def _parse_levels(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    parts = [p for p in str(text).replace(",", " ").split() if p]
    return tuple(int(p) for p in parts)


_CONVERTERS = {
    "k": int,
    "n": int,
    "levels": _parse_levels,
    "quad_order": lambda v: None if str(v).lower() in ("", "none", "default") else int(v),
    "tol": float,
    "seed": int,
    "jitter": float,
}


def read_config_file(path) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def build_config(command: str, file_values: dict, flag_values: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)} - {"command", "extra"}
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    kwargs, extra = {}, {}
    for key, value in merged.items():
        if key not in known:
            extra[key] = value
            continue
        conv = _CONVERTERS.get(key, str)
        try:
            kwargs[key] = conv(value)
        except (TypeError, ValueError):
            raise ConfigError(key, f"cannot parse {value!r}") from None
    return RunConfig(command=command, extra=extra, **kwargs).validate()


# -- commands -------------------------------------------------------------------


def _family(cfg: RunConfig, n: int) -> MeshFamily:
    return MeshFamily(FamilyKind.parse(cfg.family), n, jitter=cfg.jitter, seed=cfg.seed)


def cmd_solve(cfg: RunConfig) -> int:
    case = get_case(cfg.case)
    mesh = _family(cfg, cfg.n).build()
    uh, report, system = solve(mesh, cfg.k, case, cfg.path, cfg.tol, cfg.quad_order, cfg.stab_length)
    dm = uh.dofmap
    e_energy = energy_error(uh, case, locals_=system.locals, exactness=cfg.quad_order,
                            stab_length=cfg.stab_length)
    e_l2 = l2_error(uh, case, exactness=cfg.quad_order)
    summary = [
        f"case {cfg.case}",
        f"family {cfg.family}",
        f"n {cfg.n}",
        f"k {cfg.k}",
        f"path {cfg.path}",
        f"cells {mesh.n_cells}",
        f"dof {dm.total}",
        f"skeleton_dof {dm.n_skeleton}",
        f"unknowns {len(system.b)}",
        f"energy_error {e_energy:.10e}",
        f"l2_error {e_l2:.10e}",
        f"iterations {report.iterations}",
        f"residual {report.residual:.3e}",
        f"converged {report.converged}",
    ]
    print("\n".join(summary))
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    sol = "".join(f"{i} {v!r}\n" for i, v in enumerate(uh.values.tolist()))
    atomic_write_text(out / "solution.txt", sol)
    atomic_write_text(out / "summary.txt", "\n".join(summary) + "\n")
    return 0


def cmd_convergence(cfg: RunConfig) -> int:
    rows = run_convergence(
        get_case(cfg.case), cfg.family, cfg.k, cfg.levels, path=cfg.path, tol=cfg.tol,
        exactness=cfg.quad_order, jitter=cfg.jitter, seed=cfg.seed, stab_length=cfg.stab_length,
    )
    print(format_table(rows))
    if cfg.out:
        atomic_write_text(cfg.out, rows_to_csv(rows))
    return 0


def cmd_doftable(cfg: RunConfig) -> int:
    schemes = list(Scheme) if cfg.k == 1 else [Scheme.CWG, Scheme.CWG_SCHUR]
    if cfg.k != 1:
        print(f"note: WG, WG-Schur and CG counts are only defined for k=1; showing CWG columns for k={cfg.k}",
              file=sys.stderr)
    table = dof_table(cfg.levels, cfg.k, cfg.family, schemes)
    head = ["h"] + [s.value for s in schemes]
    body = [[f"1/{r['n']}"] + [str(r[s.value]) for s in schemes] for r in table]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in [head] + body]
    print("\n".join(lines))
    if cfg.out:
        csv_lines = [",".join(["n"] + head[1:])]
        csv_lines += [",".join(str(r[c]) for c in ["n"] + head[1:]) for r in table]
        atomic_write_text(cfg.out, "\n".join(csv_lines) + "\n")
    return 0


def cmd_meshgen(cfg: RunConfig) -> int:
    mesh = _family(cfg, cfg.n).build()
    out = cfg.out or f"mesh_{cfg.family}_{cfg.n}.txt"
    save_mesh(mesh, out)
    print(f"wrote {out}: {mesh.n_vertices} vertices, {mesh.n_cells} cells, {mesh.n_edges} edges")
    return 0


_DISPATCH = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "doftable": cmd_doftable,
    "meshgen": cmd_meshgen,
}


# -- argument parsing -----------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    # defaults are None so that config-file values survive unless overridden
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--case", help=f"manufactured solution ({', '.join(sorted(CASES))})")
    p.add_argument("--family", help="mesh family: tri, rect or perturbed")
    p.add_argument("--k", help="polynomial degree, 1 to 3")
    p.add_argument("--n", help="subdivisions per side for a single mesh")
    p.add_argument("--levels", help="comma-separated list of n, e.g. 8,16,32")
    p.add_argument("--path", help="full or schur (default schur)")
    p.add_argument("--tol", help="relative CG tolerance")
    p.add_argument("--quad-order", dest="quad_order", help="quadrature exactness override")
    p.add_argument("--stab-length", dest="stab_length", help="h_T in the stabilizer: max-edge or diameter")
    p.add_argument("--jitter", help="vertex perturbation for the perturbed family")
    p.add_argument("--seed", help="random seed for the perturbed family")
    p.add_argument("--out", help="output file (directory for solve)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cwgfem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "solve on one mesh and write solution.txt and summary.txt",
        "convergence": "run a refinement study and print the error table",
        "doftable": "degree-of-freedom counts of several schemes",
        "meshgen": "write a generated mesh to a text file",
    }
    for name in COMMANDS:
        _add_common(sub.add_parser(name, help=helps[name]))
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.command, file_values, flags)
    except ConfigError as exc:
        print(f"cwgfem: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        return _DISPATCH[cfg.command](cfg)
    except (ValueError, RuntimeError, np.linalg.LinAlgError, OSError, MeshError, SolverError) as exc:
        print(f"cwgfem: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
