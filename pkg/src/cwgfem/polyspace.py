"""Polynomial bases, quadrature and local projection/interpolation operators.

Cell functions use scaled monomials centred at the cell centroid; edge
functions use Lagrange polynomials at equally spaced nodes that include
both endpoints. All routines accept either a single cell (vertices of
shape ``(m, 2)``) or a batch of cells with the same vertex count
(``(nc, m, 2)``); batched inputs give batched outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = [
    "QuadratureRule",
    "CellBasis",
    "EdgeBasis",
    "scalar_dim",
    "default_exactness",
    "triangle_rule",
    "gauss_legendre_01",
    "polygon_quadrature",
    "edge_quadrature",
    "polygon_centroid",
    "polygon_diameter",
    "mass_matrix",
    "project_Q0",
    "project_Qh_vec",
    "interpolate_Ib",
    "project_Qb",
]


def scalar_dim(k: int) -> int:
    """Dimension of P_k in two variables."""
    return (k + 1) * (k + 2) // 2


def default_exactness(k: int) -> int:
    return 2 * k + 2


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Sum ``values`` (quadrature axis last) against the weights."""
        return np.sum(values * self.weights, axis=-1)


# -- reference rules ----------------------------------------------------------


@lru_cache(maxsize=None)
def gauss_legendre_01(exactness: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1], exact to ``exactness``."""
    n = max(1, (exactness + 2) // 2)
    t, w = roots_legendre(n)
    return 0.5 * (t + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(exactness: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss rule on the triangle (0,0), (1,0), (0,1).

    Gauss-Legendre in the collapsed direction times Gauss-Jacobi(1, 0) in
    the other absorbs the Duffy Jacobian, so ``ceil((p+1)/2)`` points per
    direction integrate total degree ``p`` exactly. Weights are positive.
    """
    n = max(1, (exactness + 2) // 2)
    a, wa = gauss_legendre_01(2 * n - 1)
    tb, wb = roots_jacobi(n, 1.0, 0.0)
    b = 0.5 * (tb + 1.0)
    wb = 0.25 * wb
    A, B = np.meshgrid(a, b, indexing="ij")
    pts = np.stack([(A * (1.0 - B)).ravel(), B.ravel()], axis=1)
    wts = np.outer(wa, wb).ravel()
    return pts, wts


# -- geometry -------------------------------------------------------------------


def _as_batch(verts) -> tuple[np.ndarray, bool]:
    verts = np.asarray(verts, dtype=float)
    if verts.ndim == 2:
        return verts[None], True
    if verts.ndim != 3 or verts.shape[-1] != 2:
        raise ValueError(f"expected cell vertices of shape (m, 2) or (nc, m, 2), got {verts.shape}")
    return verts, False


def _unbatch(x, single):
    return x[0] if single else x


def _signed_area_terms(verts):
    nxt = np.roll(verts, -1, axis=-2)
    return verts[..., 0] * nxt[..., 1] - verts[..., 1] * nxt[..., 0], nxt


def polygon_centroid(verts) -> np.ndarray:
    verts, single = _as_batch(verts)
    cross, nxt = _signed_area_terms(verts)
    area = 0.5 * cross.sum(axis=-1)
    c = np.einsum("cm,cmd->cd", cross, verts + nxt) / (6.0 * area[:, None])
    return _unbatch(c, single)


def polygon_diameter(verts) -> np.ndarray:
    verts, single = _as_batch(verts)
    diff = verts[:, :, None, :] - verts[:, None, :, :]
    d = np.sqrt((diff**2).sum(axis=-1)).max(axis=(1, 2))
    return _unbatch(d, single)


def _check_convex(verts):
    d1 = np.roll(verts, -1, axis=-2) - verts
    d2 = np.roll(d1, -1, axis=-2)
    turn = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
    scale = np.einsum("cmd,cmd->cm", d1, d1).max(axis=-1)
    if np.any(turn < -1e-12 * scale[:, None]) or np.any(
        _signed_area_terms(verts)[0].sum(axis=-1) <= 0
    ):
        raise ValueError("cell is not a convex counterclockwise polygon")


def polygon_quadrature(verts, exactness: int) -> QuadratureRule:
    """Quadrature on convex polygons by fanning triangles out of the centroid.

    Returns points of shape ``(nq, 2)`` (or ``(nc, nq, 2)`` for a batch)
    and weights ``(nq,)`` (or ``(nc, nq)``).
    """
    if exactness < 1:
        raise ValueError("exactness must be >= 1")
    verts, single = _as_batch(verts)
    _check_convex(verts)
    ref_pts, ref_w = triangle_rule(exactness)
    c = polygon_centroid(verts)[:, None, :]
    e1 = verts - c
    e2 = np.roll(verts, -1, axis=1) - c
    jac = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]  # (nc, m), = 2 * subarea
    pts = (
        c[:, :, None, :]
        + e1[:, :, None, :] * ref_pts[None, None, :, 0:1]
        + e2[:, :, None, :] * ref_pts[None, None, :, 1:2]
    )
    wts = jac[:, :, None] * ref_w[None, None, :]
    nc = verts.shape[0]
    return QuadratureRule(
        _unbatch(pts.reshape(nc, -1, 2), single), _unbatch(wts.reshape(nc, -1), single)
    )


def edge_quadrature(edge, exactness: int) -> QuadratureRule:
    """Gauss-Legendre rule on segments ``edge = [[x0, y0], [x1, y1]]``.

    Batched input has shape ``(..., 2, 2)``. Returned points are physical
    coordinates; the arclength parameters in [0, 1] are available from
    :func:`gauss_legendre_01`.
    """
    edge = np.asarray(edge, dtype=float)
    t, w = gauss_legendre_01(exactness)
    p0, p1 = edge[..., 0, :], edge[..., 1, :]
    length = np.linalg.norm(p1 - p0, axis=-1)
    if np.any(length <= 0):
        raise ValueError("degenerate (zero-length) edge")
    pts = p0[..., None, :] + (p1 - p0)[..., None, :] * t[:, None]
    return QuadratureRule(pts, length[..., None] * w)


# -- bases ----------------------------------------------------------------------


@lru_cache(maxsize=None)
def _exponents(k: int) -> np.ndarray:
    return np.array([(d - b, b) for d in range(k + 1) for b in range(d + 1)], dtype=np.int64)


@dataclass(frozen=True)
class CellBasis:
    """Scaled monomials ``((x - xc) / h)^a ((y - yc) / h)^b``, ``a + b <= k``.

    Ordered by total degree, then by increasing power of y. Because of this
    ordering the first ``scalar_dim(j)`` functions span P_j for any j <= k.
    """

    degree: int
    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def for_cells(cls, verts, k: int) -> "CellBasis":
        return cls(k, polygon_centroid(verts), np.asarray(polygon_diameter(verts)))

    @property
    def dim(self) -> int:
        return scalar_dim(self.degree)

    @property
    def exponents(self) -> np.ndarray:
        return _exponents(self.degree)

    def _scaled(self, pts):
        pts = np.asarray(pts, dtype=float)
        h = np.asarray(self.scale)[..., None, None]
        return (pts - np.asarray(self.center)[..., None, :]) / h

    def _powers(self, s):
        k = self.degree
        return s[..., None] ** np.arange(k + 1)

    def values(self, pts) -> np.ndarray:
        """Basis values at ``pts`` of shape ``(..., nq, 2)``; returns ``(..., nq, dim)``."""
        s = self._scaled(pts)
        px, py = self._powers(s[..., 0]), self._powers(s[..., 1])
        a, b = self.exponents.T
        return px[..., a] * py[..., b]

    def gradients(self, pts) -> np.ndarray:
        """Basis gradients at ``pts``; returns ``(..., nq, dim, 2)``."""
        s = self._scaled(pts)
        px, py = self._powers(s[..., 0]), self._powers(s[..., 1])
        j = np.arange(self.degree + 1)
        dpx = np.zeros_like(px)
        dpy = np.zeros_like(py)
        dpx[..., 1:] = j[1:] * px[..., :-1]
        dpy[..., 1:] = j[1:] * py[..., :-1]
        a, b = self.exponents.T
        h = np.asarray(self.scale)[..., None, None]
        gx = dpx[..., a] * py[..., b] / h
        gy = px[..., a] * dpy[..., b] / h
        return np.stack([gx, gy], axis=-1)

    def evaluate(self, coeffs, pts) -> np.ndarray:
        return np.einsum("...qi,...i->...q", self.values(pts), coeffs)


@dataclass(frozen=True)
class EdgeBasis:
    """Lagrange basis of P_k on a segment at equally spaced nodes.

    Nodes are ``t_j = j / k`` in the normalised arclength parameter, so node
    0 and node k are the segment endpoints.
    """

    degree: int

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.degree + 1)

    def node_points(self, edge) -> np.ndarray:
        edge = np.asarray(edge, dtype=float)
        p0, p1 = edge[..., 0, :], edge[..., 1, :]
        t = self.nodes
        return p0[..., None, :] + (p1 - p0)[..., None, :] * t[:, None]

    def values(self, t) -> np.ndarray:
        """Lagrange values at parameters ``t``; returns ``(len(t), k + 1)``."""
        t = np.asarray(t, dtype=float)[..., None]
        nodes = self.nodes
        out = np.ones(t.shape[:-1] + (len(nodes),))
        for j, tj in enumerate(nodes):
            for m, tm in enumerate(nodes):
                if m != j:
                    out[..., j] *= (t[..., 0] - tm) / (tj - tm)
        return out


# -- projections ----------------------------------------------------------------


def mass_matrix(verts, k: int, exactness: int | None = None) -> np.ndarray:
    """Cell mass matrix of the degree-k scaled monomial basis."""
    verts, single = _as_batch(verts)
    rule = polygon_quadrature(verts, exactness or default_exactness(k))
    phi = CellBasis.for_cells(verts, k).values(rule.points)
    m = np.einsum("cq,cqi,cqj->cij", rule.weights, phi, phi)
    return _unbatch(m, single)


def _solve_mass(m, rhs):
    try:
        return np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError:
        raise ValueError("singular mass matrix: degenerate cell geometry") from None


def project_Q0(f, verts, k: int, exactness: int | None = None) -> np.ndarray:
    """L2 projection of ``f(x, y)`` onto P_k of each cell.

    Returns the coefficients in :class:`CellBasis` ordering.
    """
    verts, single = _as_batch(verts)
    rule = polygon_quadrature(verts, exactness or default_exactness(k))
    phi = CellBasis.for_cells(verts, k).values(rule.points)
    fq = np.broadcast_to(f(rule.points[..., 0], rule.points[..., 1]), rule.weights.shape)
    m = np.einsum("cq,cqi,cqj->cij", rule.weights, phi, phi)
    r = np.einsum("cq,cq,cqi->ci", rule.weights, fq, phi)
    return _unbatch(_solve_mass(m, r[..., None])[..., 0], single)


def project_Qh_vec(g, verts, k: int, exactness: int | None = None) -> np.ndarray:
    """L2 projection of a vector field onto [P_{k-1}]^2.

    ``g(x, y)`` returns the pair of components. The result stacks the
    x-coefficients then the y-coefficients of the degree k-1 basis.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    verts, single = _as_batch(verts)
    rule = polygon_quadrature(verts, exactness or default_exactness(k))
    p = CellBasis.for_cells(verts, k - 1).values(rule.points)
    gx, gy = g(rule.points[..., 0], rule.points[..., 1])
    m = np.einsum("cq,cqi,cqj->cij", rule.weights, p, p)
    r = np.stack(
        [
            np.einsum("cq,cq,cqi->ci", rule.weights, np.broadcast_to(gx, rule.weights.shape), p),
            np.einsum("cq,cq,cqi->ci", rule.weights, np.broadcast_to(gy, rule.weights.shape), p),
        ],
        axis=-1,
    )
    c = _solve_mass(m, r)
    return _unbatch(np.concatenate([c[..., 0], c[..., 1]], axis=-1), single)


def interpolate_Ib(g, edge, k: int) -> np.ndarray:
    """Lagrange interpolant of ``g`` on an edge: its values at the k+1 nodes."""
    pts = EdgeBasis(k).node_points(edge)
    return np.asarray(g(pts[..., 0], pts[..., 1]), dtype=float) * np.ones(pts.shape[:-1])


def project_Qb(g, edge, k: int, exactness: int | None = None) -> np.ndarray:
    """L2 projection of ``g`` onto P_k(e), as nodal values in :class:`EdgeBasis`."""
    basis = EdgeBasis(k)
    t, _ = gauss_legendre_01(exactness or default_exactness(k))
    rule = edge_quadrature(edge, exactness or default_exactness(k))
    lam = basis.values(t)
    gq = np.broadcast_to(g(rule.points[..., 0], rule.points[..., 1]), rule.weights.shape)
    m = np.einsum("...q,qi,qj->...ij", rule.weights, lam, lam)
    r = np.einsum("...q,...q,qi->...i", rule.weights, gq, lam)
    return np.linalg.solve(m, r[..., None])[..., 0]
