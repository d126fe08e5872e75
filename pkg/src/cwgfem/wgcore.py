"""Discrete weak gradient and the per-cell matrices of the WG bilinear form.

A weak function on a cell is a coefficient vector ``[v0 | vb]``: ``v0``
holds the scaled-monomial coefficients of the interior polynomial and
``vb`` the nodal values of the boundary polynomial. Boundary values are
numbered vertices first (local vertex order), then the ``k - 1`` interior
nodes of each local edge, so adjacent edges of a cell share their vertex
value.

All functions work on a batch of cells with equal vertex count,
``verts`` of shape ``(nc, m, 2)``; a single ``(m, 2)`` cell is accepted
too and gives unbatched results.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .polyspace import (
    CellBasis,
    EdgeBasis,
    default_exactness,
    gauss_legendre_01,
    polygon_quadrature,
    scalar_dim,
)

__all__ = [
    "CoefficientError",
    "DegenerateCellError",
    "LocalDofLayout",
    "LocalSystem",
    "identity_coefficient",
    "constant_coefficient",
    "weak_gradient_matrix",
    "local_stiffness",
    "local_stabilizer",
    "local_load",
    "local_system",
    "STAB_LENGTHS",
    "stabilizer_length",
]

STAB_LENGTHS = ("max-edge", "diameter")


class DegenerateCellError(ValueError):
    pass


class CoefficientError(ValueError):
    """The diffusion coefficient is not symmetric positive definite."""


@dataclass(frozen=True)
class LocalDofLayout:
    nverts: int
    k: int

    @property
    def n0(self) -> int:
        return scalar_dim(self.k)

    @property
    def nb(self) -> int:
        return self.nverts * self.k

    @property
    def size(self) -> int:
        return self.n0 + self.nb

    @property
    def edge_dofs(self) -> np.ndarray:
        """``(m, k + 1)`` local boundary dofs at the nodes of each local edge.

        Row ``i`` lists the nodes from local vertex ``i`` to vertex ``i + 1``.
        Indices count from 0 within the boundary block.
        """
        return _edge_dofs(self.nverts, self.k)


@lru_cache(maxsize=None)
def _edge_dofs(m: int, k: int) -> np.ndarray:
    out = np.empty((m, k + 1), dtype=np.int64)
    for i in range(m):
        out[i, 0] = i
        out[i, 1:k] = m + i * (k - 1) + np.arange(k - 1)
        out[i, k] = (i + 1) % m
    out.setflags(write=False)
    return out


def stabilizer_length(verts, mode: str = "max-edge") -> np.ndarray:
    """Cell length ``h_T`` weighting the stabilizer.

    ``"max-edge"`` is the longest side, ``"diameter"`` the largest vertex
    distance. They agree on triangles; on a square the diameter is
    ``sqrt(2)`` times the side.
    """
    verts = np.asarray(verts, dtype=float)
    if mode == "max-edge":
        d = np.roll(verts, -1, axis=-2) - verts
        return np.sqrt((d**2).sum(axis=-1)).max(axis=-1)
    if mode == "diameter":
        diff = verts[..., :, None, :] - verts[..., None, :, :]
        return np.sqrt((diff**2).sum(axis=-1)).max(axis=(-2, -1))
    raise ValueError(f"stabilizer length must be one of {STAB_LENGTHS}, got {mode!r}")


def identity_coefficient(x, y):
    return np.broadcast_to(np.eye(2), np.shape(x) + (2, 2))


def constant_coefficient(matrix):
    """Coefficient function returning the same 2x2 ``matrix`` everywhere."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape == ():
        matrix = matrix * np.eye(2)

    def a(x, y):
        return np.broadcast_to(matrix, np.shape(x) + (2, 2))

    return a


@dataclass
class LocalSystem:
    """Local matrices for a batch of cells.

    ``G`` maps local weak-function coefficients to weak-gradient
    coefficients in [P_{k-1}]^2 (x-block then y-block). ``K`` and ``S``
    are the stiffness and stabilizer, ``F`` the load with zeros in the
    boundary rows, ``h`` the cell lengths weighting the stabilizer.
    """

    layout: LocalDofLayout
    G: np.ndarray
    K: np.ndarray
    S: np.ndarray
    F: np.ndarray
    h: np.ndarray
    cell_ids: np.ndarray | None = None

    @property
    def A(self) -> np.ndarray:
        return self.K + self.S


class _CellData:
    """Quadrature data shared by all local operators on a batch of cells."""

    def __init__(self, verts, k, exactness=None, stab_length="max-edge"):
        verts = np.asarray(verts, dtype=float)
        self.single = verts.ndim == 2
        if self.single:
            verts = verts[None]
        self.verts = verts
        self.k = k
        self.layout = LocalDofLayout(verts.shape[1], k)
        q = exactness or default_exactness(k)
        try:
            rule = polygon_quadrature(verts, q)
        except ValueError as err:
            raise DegenerateCellError(str(err)) from None
        self.points, self.weights = rule.points, rule.weights
        self.basis = CellBasis.for_cells(verts, k)
        self.h = stabilizer_length(verts, stab_length)
        self.phi = self.basis.values(self.points)
        self.n1 = scalar_dim(k - 1)

        # edges: parameters t (ng,), weights scaled by length (nc, m, ng)
        t, w = gauss_legendre_01(q)
        p0 = verts
        p1 = np.roll(verts, -1, axis=1)
        d = p1 - p0
        length = np.linalg.norm(d, axis=-1)
        if np.any(length <= 0):
            raise DegenerateCellError("zero-length edge")
        self.edge_t = t
        self.edge_w = length[..., None] * w
        self.edge_pts = p0[:, :, None, :] + d[:, :, None, :] * t[:, None]
        self.normals = np.stack([d[..., 1], -d[..., 0]], axis=-1) / length[..., None]
        self.lam = EdgeBasis(k).values(t)  # (ng, k+1)
        nc, m, ng = self.edge_pts.shape[:3]
        self.phi_edge = self.basis.values(self.edge_pts.reshape(nc, m * ng, 2)).reshape(
            nc, m, ng, -1
        )

    def out(self, x):
        return x[0] if self.single else x


def _vector_values(p, n1):
    """Values of the vector basis ``[(p_i, 0)..., (0, p_i)...]``: ``(..., 2 n1, 2)``."""
    z = np.zeros(p.shape[:-1] + (2 * n1, 2))
    z[..., :n1, 0] = p
    z[..., n1:, 1] = p
    return z


def _weak_gradient(data: _CellData) -> np.ndarray:
    n1, lay = data.n1, data.layout
    nc = data.verts.shape[0]
    w = data.weights
    p = data.phi[..., :n1]
    ms = np.einsum("cq,cqi,cqj->cij", w, p, p)
    mvec = np.zeros((nc, 2 * n1, 2 * n1))
    mvec[:, :n1, :n1] = ms
    mvec[:, n1:, n1:] = ms

    grads = data.basis.gradients(data.points)[..., :n1, :]  # d p_i / dx, dy
    div_q = np.concatenate([grads[..., 0], grads[..., 1]], axis=-1)  # (nc, nq, 2 n1)
    B = np.zeros((nc, 2 * n1, lay.size))
    B[:, :, : lay.n0] = -np.einsum("cq,cqi,cqj->cij", w, div_q, data.phi)

    pe = data.phi_edge[..., :n1]  # (nc, m, ng, n1)
    qn = np.concatenate(
        [pe * data.normals[:, :, None, 0:1], pe * data.normals[:, :, None, 1:2]], axis=-1
    )  # (nc, m, ng, 2 n1)
    contrib = np.einsum("cmg,cmgi,ga->cmia", data.edge_w, qn, data.lam)
    for e, dofs in enumerate(lay.edge_dofs):
        B[:, :, lay.n0 + dofs] += contrib[:, e]
    try:
        return np.linalg.solve(mvec, B)
    except np.linalg.LinAlgError:
        raise DegenerateCellError("singular vector mass matrix") from None


def _coefficient_at(a, data: _CellData) -> np.ndarray:
    x, y = data.points[..., 0], data.points[..., 1]
    if a is None:
        return identity_coefficient(x, y)
    aq = np.broadcast_to(np.asarray(a(x, y), dtype=float), x.shape + (2, 2))
    if np.max(np.abs(aq - np.swapaxes(aq, -1, -2))) > 1e-12 * max(1.0, np.max(np.abs(aq))):
        raise CoefficientError("coefficient is not symmetric at a quadrature point")
    if np.any(np.linalg.eigvalsh(aq)[..., 0] <= 0):
        raise CoefficientError("coefficient is not positive definite at a quadrature point")
    return aq


def _stiffness(data: _CellData, G, a) -> np.ndarray:
    aq = _coefficient_at(a, data)
    Q = _vector_values(data.phi[..., : data.n1], data.n1)
    Ma = np.einsum("cq,cqid,cqde,cqje->cij", data.weights, Q, aq, Q)
    K = np.einsum("cai,cab,cbj->cij", G, Ma, G)
    return 0.5 * (K + np.swapaxes(K, -1, -2))


def _trace_difference(data: _CellData) -> np.ndarray:
    """``v0 - vb`` at edge quadrature points as rows over local dofs: ``(nc, m, ng, n)``."""
    lay = data.layout
    nc, m = data.verts.shape[:2]
    T = np.zeros((nc, m, len(data.edge_t), lay.size))
    T[..., : lay.n0] = data.phi_edge
    for e, dofs in enumerate(lay.edge_dofs):
        Te = T[:, e]
        Te[..., lay.n0 + dofs] -= data.lam
    return T


def _stabilizer(data: _CellData) -> np.ndarray:
    T = _trace_difference(data)
    S = np.einsum("cmg,cmgi,cmgj->cij", data.edge_w, T, T) / data.h[:, None, None]
    return 0.5 * (S + np.swapaxes(S, -1, -2))


def _load(data: _CellData, f) -> np.ndarray:
    nc = data.verts.shape[0]
    F = np.zeros((nc, data.layout.size))
    if f is not None:
        fq = np.broadcast_to(f(data.points[..., 0], data.points[..., 1]), data.weights.shape)
        F[:, : data.layout.n0] = np.einsum("cq,cq,cqi->ci", data.weights, fq, data.phi)
    return F


def weak_gradient_matrix(verts, k: int, exactness: int | None = None) -> np.ndarray:
    """Matrix of the discrete weak gradient into [P_{k-1}]^2.

    Column ``j`` holds the coefficients of the weak gradient of the j-th
    local basis function, obtained from the local mass system
    ``M G = B`` with ``B_ij = -(phi_j^0, div q_i) + <phi_j^b, q_i . n>``.
    """
    data = _CellData(verts, k, exactness)
    return data.out(_weak_gradient(data))


def local_stiffness(verts, k: int, a=None, exactness: int | None = None) -> np.ndarray:
    """``K = G^T M_a G`` with ``M_a`` the ``a``-weighted vector mass matrix.

    ``a(x, y)`` returns symmetric positive definite 2x2 matrices with shape
    ``x.shape + (2, 2)``; ``None`` means the identity.
    """
    data = _CellData(verts, k, exactness)
    return data.out(_stiffness(data, _weak_gradient(data), a))


def local_stabilizer(verts, k: int, exactness: int | None = None,
                     stab_length: str = "max-edge") -> np.ndarray:
    """``h_T^{-1} <v0 - vb, w0 - wb>`` over the cell boundary as a matrix.

    ``h_T`` is chosen by ``stab_length``, see :func:`stabilizer_length`.
    """
    data = _CellData(verts, k, exactness, stab_length)
    return data.out(_stabilizer(data))


def local_load(verts, k: int, f, exactness: int | None = None) -> np.ndarray:
    data = _CellData(verts, k, exactness)
    return data.out(_load(data, f))


def local_system(verts, k: int, a=None, f=None, exactness: int | None = None,
                 stab_length: str = "max-edge") -> LocalSystem:
    """All local matrices at once, sharing quadrature and basis evaluations."""
    data = _CellData(verts, k, exactness, stab_length)
    G = _weak_gradient(data)
    out = data.out
    return LocalSystem(
        layout=data.layout,
        G=out(G),
        K=out(_stiffness(data, G, a)),
        S=out(_stabilizer(data)),
        F=out(_load(data, f)),
        h=out(data.h),
    )
