import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cwgfem.mesh import (
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


@pytest.mark.parametrize(
    "n, counts",
    [(1, (2, 4, 5)), (8, (128, 81, 208)), (16, (512, 289, 800))],
)
def test_triangle_counts(n, counts):
    mesh = build_uniform_triangle_mesh(n)
    assert (mesh.n_cells, mesh.n_vertices, mesh.n_edges) == counts


@pytest.mark.parametrize("n, counts", [(1, (1, 4, 4)), (8, (64, 81, 144))])
def test_rectangle_counts(n, counts):
    mesh = build_uniform_rectangle_mesh(n)
    assert (mesh.n_cells, mesh.n_vertices, mesh.n_edges) == counts


@pytest.mark.parametrize("kind", list(FamilyKind))
@pytest.mark.parametrize("n", [1, 3, 8])
def test_expected_counts_match_built(kind, n):
    fam = MeshFamily(kind, n)
    mesh = fam.build()
    assert fam.expected_counts() == (mesh.n_cells, mesh.n_vertices, mesh.n_edges)


@pytest.mark.parametrize("build", [build_uniform_triangle_mesh, build_uniform_rectangle_mesh])
def test_areas_and_boundary(build):
    mesh = build(6)
    assert mesh.cell_areas.sum() == pytest.approx(1.0, rel=1e-12)
    assert mesh.boundary_edges.sum() == 4 * 6
    # boundary edges have exactly one adjacent cell
    ec = mesh.edge_cells
    assert np.all((ec[:, 1] == -1) == mesh.boundary_edges)
    assert mesh.boundary_vertices.sum() == 4 * 6
    assert mesh.mesh_size == pytest.approx(mesh.cell_diameter.max())


def test_edge_normal_is_outward_unit():
    mesh = build_uniform_triangle_mesh(3)
    for e in range(mesh.n_edges):
        for c in mesh.edge_cells[e]:
            if c < 0:
                continue
            nrm = mesh.edge_normal(e, c)
            assert np.linalg.norm(nrm) == pytest.approx(1.0)
            mid = mesh.vertices[mesh.edges[e]].mean(axis=0)
            centroid = mesh.cell_vertices(c).mean(axis=0)
            assert np.dot(mid - centroid, nrm) > 0


def test_perturbed_zero_jitter_is_uniform():
    a = build_perturbed_triangle_mesh(5, jitter=0.0, seed=3)
    b = build_uniform_triangle_mesh(5)
    assert np.array_equal(a.vertices, b.vertices)
    assert a.cells == b.cells


def test_perturbed_is_deterministic_and_valid():
    a = build_perturbed_triangle_mesh(8, jitter=0.2, seed=1)
    b = build_perturbed_triangle_mesh(8, jitter=0.2, seed=1)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.all(a.cell_areas > 0)
    assert a.cell_areas.sum() == pytest.approx(1.0, rel=1e-12)
    # boundary stays on the square
    bv = a.vertices[a.boundary_vertices]
    on_side = np.isclose(bv, 0.0) | np.isclose(bv, 1.0)
    assert np.all(on_side.any(axis=1))


@given(n=st.integers(1, 6), jitter=st.floats(0.0, 0.45), seed=st.integers(0, 2**16))
@settings(max_examples=30, deadline=None)
def test_perturbed_always_valid(n, jitter, seed):
    mesh = build_perturbed_triangle_mesh(n, jitter, seed)
    assert np.all(mesh.cell_areas > 0)
    assert mesh.cell_areas.sum() == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("jitter", [-0.1, 0.5])
def test_perturbed_rejects_large_jitter(jitter):
    with pytest.raises(ValueError):
        build_perturbed_triangle_mesh(4, jitter=jitter)


@pytest.mark.parametrize(
    "verts, cells, msg",
    [
        ([[0, 0], [1, 0], [0, 1]], [(0, 2, 1)], "counterclockwise|orient"),
        ([[0, 0], [1, 0], [0, 1]], [(0, 1, 5)], "dangling"),
        ([[0, 0], [1, 0], [0, 1]], [(0, 1, 1)], "repeats"),
        ([[0, 0], [2, 0], [1, 0.2], [1, 2], [0, 2]], [(0, 1, 2, 3, 4)], "convex"),
    ],
)
def test_invalid_meshes(verts, cells, msg):
    with pytest.raises(MeshError, match=msg):
        Mesh(verts, cells)


def test_same_direction_shared_edge():
    # two counterclockwise triangles stacked on the same side of (0, 1)
    verts = [[0, 0], [1, 0], [0, 1], [0.5, 0.5]]
    with pytest.raises(MeshError, match="same direction"):
        Mesh(verts, [(0, 1, 2), (0, 1, 3)])


def test_family_parse_aliases():
    assert FamilyKind.parse("uniform-triangle") is FamilyKind.TRIANGLE
    assert FamilyKind.parse("RECT") is FamilyKind.RECTANGLE
    with pytest.raises(ValueError, match="unknown mesh family"):
        FamilyKind.parse("hex")


def test_save_load_roundtrip(tmp_path):
    mesh = build_perturbed_triangle_mesh(4, seed=7)
    p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
    save_mesh(mesh, p1)
    again = load_mesh(p1)
    assert np.array_equal(again.vertices, mesh.vertices)
    assert again.cells == mesh.cells
    save_mesh(again, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert not list(tmp_path.glob(".*tmp"))


def test_load_two_triangle_fixture(tmp_path):
    p = tmp_path / "sq.txt"
    p.write_text(
        "# unit square split along the diagonal\n"
        "4 2\n0 0\n1 0\n1 1\n0 1\n\n3 0 1 2\n3 0 2 3\n"
    )
    mesh = load_mesh(p)
    assert mesh.n_cells == 2 and mesh.n_edges == 5


@pytest.mark.parametrize(
    "text, msg",
    [
        ("3 1\n0 0\n1 0\n0 1\n3 0 1 3\n", "line 5: dangling vertex"),
        ("3 1\n0 0\n1 0\n0 1\n3 0 2 1\n", "line 5: cell is not counterclockwise"),
        ("3 2\n0 0\n1 0\n0 1\n3 0 1 2\n", "expected 3 vertex and 2 cell"),
        ("3 1\n0 0\n1 zero\n0 1\n3 0 1 2\n", "line 3: bad coordinate"),
        ("", "empty"),
    ],
)
def test_load_errors(tmp_path, text, msg):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(MeshError, match=msg):
        load_mesh(p)
