"""Polygonal meshes of planar domains with derived edge topology."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._fileio import atomic_write_text

__all__ = [
    "MeshError",
    "Mesh",
    "CellGroup",
    "FamilyKind",
    "MeshFamily",
    "build_uniform_triangle_mesh",
    "build_uniform_rectangle_mesh",
    "build_perturbed_triangle_mesh",
    "load_mesh",
    "save_mesh",
]


class MeshError(ValueError):
    """Invalid mesh geometry, topology or file contents."""


@dataclass(frozen=True)
class CellGroup:
    """Cells sharing the same vertex count, stored as dense arrays.

    Local edge ``i`` of a cell runs from local vertex ``i`` to ``i + 1``.
    ``edge_flip[c, i]`` is True when that direction is opposite to the
    global orientation of the edge (lower vertex index first).
    """

    nverts: int
    cell_ids: np.ndarray  # (nc,)
    vertex_ids: np.ndarray  # (nc, m)
    edge_ids: np.ndarray  # (nc, m)
    edge_flip: np.ndarray  # (nc, m) bool

    def __len__(self) -> int:
        return len(self.cell_ids)


class Mesh:
    """Immutable 2D polygonal mesh.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
        Vertex coordinates.
    cells : sequence of sequence of int
        Vertex loops, counterclockwise, 0-based.

    Edges, their adjacent cells and the boundary flags are derived from
    the cell loops. Construction validates orientation, convexity and
    edge consistency and raises :class:`MeshError` on failure.
    """

    def __init__(self, vertices, cells):
        vertices = np.array(vertices, dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        self.vertices = vertices
        self.vertices.setflags(write=False)
        self.cells = tuple(tuple(int(i) for i in c) for c in cells)
        self._check_cells()
        self._build_topology()
        self._build_geometry()

    # -- construction -------------------------------------------------------

    def _check_cells(self):
        nv = len(self.vertices)
        for c, loop in enumerate(self.cells):
            if len(loop) < 3:
                raise MeshError(f"cell {c} has fewer than 3 vertices")
            if len(set(loop)) != len(loop):
                raise MeshError(f"cell {c} repeats a vertex")
            for i in loop:
                if i < 0 or i >= nv:
                    raise MeshError(f"cell {c} has dangling vertex index {i}")

    def _build_topology(self):
        sizes = np.array([len(c) for c in self.cells])
        groups = []
        for m in np.unique(sizes):
            ids = np.flatnonzero(sizes == m)
            vids = np.array([self.cells[c] for c in ids], dtype=np.int64).reshape(len(ids), m)
            groups.append((int(m), ids, vids))

        # every cell side, in cell order, as (start, end)
        starts = np.concatenate([np.asarray(c) for c in self.cells])
        ends = np.concatenate([np.roll(np.asarray(c), -1) for c in self.cells])
        owner = np.repeat(np.arange(len(self.cells)), sizes)
        lo = np.minimum(starts, ends)
        hi = np.maximum(starts, ends)
        key = np.stack([lo, hi], axis=1)
        edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            e = int(np.flatnonzero(counts > 2)[0])
            raise MeshError(f"edge {tuple(edges[e])} is shared by more than two cells")
        flip = starts > ends

        ne = len(edges)
        edge_cells = np.full((ne, 2), -1, dtype=np.int64)
        # first occurrence goes in slot 0, second in slot 1
        order = np.argsort(inverse, kind="stable")
        sorted_e = inverse[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_e[1:] != sorted_e[:-1]
        edge_cells[sorted_e[first], 0] = owner[order[first]]
        edge_cells[sorted_e[~first], 1] = owner[order[~first]]
        # a shared edge must be traversed in opposite directions
        flip_sorted = flip[order]
        dup = np.flatnonzero(~first)
        same = flip_sorted[dup] == flip_sorted[dup - 1]
        if np.any(same):
            e = int(sorted_e[dup[same][0]])
            raise MeshError(
                f"edge {tuple(edges[e])} is traversed in the same direction by two cells"
            )

        offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.edges = edges.astype(np.int64)
        self.edge_cells = edge_cells
        self.boundary_edges = edge_cells[:, 1] < 0
        self.cell_edges = tuple(
            inverse[offsets[c]:offsets[c + 1]] for c in range(len(self.cells))
        )
        self.groups = tuple(
            CellGroup(
                nverts=m,
                cell_ids=ids,
                vertex_ids=vids,
                edge_ids=inverse[offsets[ids][:, None] + np.arange(m)],
                edge_flip=flip[offsets[ids][:, None] + np.arange(m)],
            )
            for m, ids, vids in groups
        )
        bverts = np.zeros(len(self.vertices), dtype=bool)
        bverts[self.edges[self.boundary_edges].ravel()] = True
        self.boundary_vertices = bverts
        for a in (self.edges, self.edge_cells, self.boundary_edges, self.boundary_vertices):
            a.setflags(write=False)

    def _build_geometry(self):
        areas = np.empty(len(self.cells))
        diam = np.empty(len(self.cells))
        for g in self.groups:
            xy = self.vertices[g.vertex_ids]
            nxt = np.roll(xy, -1, axis=1)
            cross = xy[..., 0] * nxt[..., 1] - xy[..., 1] * nxt[..., 0]
            area = 0.5 * cross.sum(axis=1)
            bad = np.flatnonzero(area <= 0)
            if len(bad):
                raise MeshError(f"cell {g.cell_ids[bad[0]]} is not counterclockwise")
            d1 = nxt - xy
            d2 = np.roll(d1, -1, axis=1)
            turn = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
            scale = np.einsum("cmd,cmd->cm", d1, d1).max(axis=1)
            bad = np.flatnonzero((turn < -1e-12 * scale[:, None]).any(axis=1))
            if len(bad):
                raise MeshError(f"cell {g.cell_ids[bad[0]]} is not convex")
            diff = xy[:, :, None, :] - xy[:, None, :, :]
            areas[g.cell_ids] = area
            diam[g.cell_ids] = np.sqrt((diff**2).sum(axis=-1)).max(axis=(1, 2))
        self.cell_areas = areas
        self.cell_diameter = diam
        self.mesh_size = float(diam.max())
        areas.setflags(write=False)
        diam.setflags(write=False)

    # -- queries ------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def cell_vertices(self, c: int) -> np.ndarray:
        return self.vertices[list(self.cells[c])]

    def edge_normal(self, e: int, c: int) -> np.ndarray:
        """Outward unit normal of edge ``e`` with respect to cell ``c``."""
        loop = self.cells[c]
        i, j = self.edges[e]
        pos = loop.index(i)
        if loop[(pos + 1) % len(loop)] == j:
            a, b = i, j
        elif loop[pos - 1] == j:
            a, b = j, i
        else:
            raise MeshError(f"edge {e} is not a side of cell {c}")
        t = self.vertices[b] - self.vertices[a]
        return np.array([t[1], -t[0]]) / np.hypot(*t)

    def __repr__(self) -> str:
        return (
            f"Mesh(n_vertices={self.n_vertices}, n_cells={self.n_cells}, "
            f"n_edges={self.n_edges}, h={self.mesh_size:.4g})"
        )


# -- generators ---------------------------------------------------------------


def _check_level(n) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"number of subdivisions must be a positive integer, got {n!r}")
    return int(n)


def _grid(n: int) -> np.ndarray:
    t = np.arange(n + 1) / n
    x, y = np.meshgrid(t, t, indexing="xy")
    return np.stack([x.ravel(), y.ravel()], axis=1)


def _triangle_cells(n: int) -> np.ndarray:
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    # diagonal from bottom-left to top-right
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    return np.stack([lower, upper], axis=1).reshape(-1, 3)


def build_uniform_triangle_mesh(n: int) -> Mesh:
    """Unit square, ``n`` x ``n`` squares each cut along the same diagonal."""
    n = _check_level(n)
    return Mesh(_grid(n), _triangle_cells(n))


def build_uniform_rectangle_mesh(n: int) -> Mesh:
    """Unit square divided into ``n`` x ``n`` congruent squares."""
    n = _check_level(n)
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    cells = np.stack([v00, v00 + 1, v00 + n + 2, v00 + n + 1], axis=1)
    return Mesh(_grid(n), cells)


def build_perturbed_triangle_mesh(n: int, jitter: float = 0.2, seed: int = 0) -> Mesh:
    """Uniform triangle mesh with randomly displaced interior vertices.

    Each interior vertex moves by a uniform offset in
    ``[-jitter * h, jitter * h]`` per coordinate, ``h = 1 / n``.
    Boundary vertices stay fixed. The result is deterministic in ``seed``.
    """
    n = _check_level(n)
    if not 0.0 <= jitter < 0.5:
        raise ValueError(f"jitter must lie in [0, 0.5), got {jitter!r}")
    xy = _grid(n)
    rng = np.random.default_rng(seed)
    shift = rng.uniform(-jitter / n, jitter / n, size=xy.shape)
    interior = (xy > 0).all(axis=1) & (xy < 1).all(axis=1)
    xy[interior] += shift[interior]
    return Mesh(xy, _triangle_cells(n))


class FamilyKind(str, enum.Enum):
    TRIANGLE = "tri"
    RECTANGLE = "rect"
    PERTURBED = "perturbed"

    @classmethod
    def parse(cls, value) -> "FamilyKind":
        if isinstance(value, cls):
            return value
        aliases = {
            "uniform-triangle": cls.TRIANGLE,
            "uniform-rectangle": cls.RECTANGLE,
            "perturbed-triangle": cls.PERTURBED,
        }
        value = str(value).strip().lower()
        if value in aliases:
            return aliases[value]
        try:
            return cls(value)
        except ValueError:
            raise ValueError(
                f"unknown mesh family {value!r}; expected one of tri, rect, perturbed"
            ) from None


@dataclass(frozen=True)
class MeshFamily:
    """A generated mesh on the unit square, ``h = 1 / n``."""

    kind: FamilyKind
    n: int
    jitter: float = 0.2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind.parse(self.kind))
        _check_level(self.n)

    def build(self) -> Mesh:
        if self.kind is FamilyKind.TRIANGLE:
            return build_uniform_triangle_mesh(self.n)
        if self.kind is FamilyKind.RECTANGLE:
            return build_uniform_rectangle_mesh(self.n)
        return build_perturbed_triangle_mesh(self.n, self.jitter, self.seed)

    def expected_counts(self) -> tuple[int, int, int]:
        """Closed-form (cells, vertices, edges)."""
        n = self.n
        if self.kind is FamilyKind.RECTANGLE:
            return n * n, (n + 1) ** 2, 2 * n * n + 2 * n
        return 2 * n * n, (n + 1) ** 2, 3 * n * n + 2 * n


# -- file I/O -----------------------------------------------------------------


def save_mesh(mesh: Mesh, path) -> None:
    """Write ``mesh`` in the plain-text format read by :func:`load_mesh`.

    Coordinates are written with ``repr`` so that a reload is bit-exact.
    """
    lines = [f"{mesh.n_vertices} {mesh.n_cells}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines += [" ".join(map(str, (len(c),) + c)) for c in mesh.cells]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_mesh(path) -> Mesh:
    """Read a mesh file.

    Format: a header line ``nv nc``, then ``nv`` lines ``x y``, then ``nc``
    lines ``m i1 ... im`` with 0-based counterclockwise vertex indices.
    Blank lines and ``#`` comments are skipped. Errors carry the line number.
    """
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            rows.append((lineno, text.split()))
    if not rows:
        raise MeshError("empty mesh file")

    def fail(lineno, msg):
        raise MeshError(f"line {lineno}: {msg}")

    lineno, head = rows[0]
    try:
        nv, nc = (int(t) for t in head)
    except ValueError:
        fail(lineno, "header must be 'nv nc'")
    if nv < 3 or nc < 1:
        fail(lineno, f"bad counts nv={nv}, nc={nc}")
    if len(rows) != 1 + nv + nc:
        fail(rows[-1][0], f"expected {nv} vertex and {nc} cell lines, found {len(rows) - 1} lines")

    vertices = np.empty((nv, 2))
    for v, (lineno, tok) in enumerate(rows[1:1 + nv]):
        if len(tok) != 2:
            fail(lineno, "vertex line must be 'x y'")
        try:
            vertices[v] = [float(t) for t in tok]
        except ValueError:
            fail(lineno, f"bad coordinate in {' '.join(tok)!r}")

    cells = []
    for lineno, tok in rows[1 + nv:]:
        try:
            ints = [int(t) for t in tok]
        except ValueError:
            fail(lineno, "cell line must contain integers")
        m, loop = ints[0], ints[1:]
        if m < 3 or len(loop) != m:
            fail(lineno, f"cell declares {m} vertices but lists {len(loop)}")
        bad = [i for i in loop if i < 0 or i >= nv]
        if bad:
            fail(lineno, f"dangling vertex index {bad[0]} (nv={nv})")
        xy = vertices[loop]
        area = 0.5 * np.sum(xy[:, 0] * np.roll(xy[:, 1], -1) - xy[:, 1] * np.roll(xy[:, 0], -1))
        if area <= 0:
            fail(lineno, "cell is not counterclockwise")
        cells.append(loop)
    return Mesh(vertices, cells)
