"""Quadrature, reference bases and the global numbering of the discrete unknowns."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from .mesh import Mesh, Skeleton, BoundaryTags, Tag

DEFAULT_QUAD_DEGREE = 6
DEFAULT_EDGE_POINTS = 4
MAX_DEGREE = 10


@dataclass(frozen=True, eq=False)
class QuadRule:
    """Points and weights on the reference triangle (points shape (n, 2))
    or on the unit interval (points shape (n,))."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def triangle_quadrature(degree: int) -> QuadRule:
    """Collapsed (Stroud conical product) rule on the triangle (0,0),(1,0),(0,1).

    Gauss-Jacobi in the collapsed direction absorbs the Duffy Jacobian, so
    ``n = ceil((degree+1)/2)`` points per direction give exactness ``degree``.
    """
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (1..{MAX_DEGREE})")
    n = (degree + 2) // 2
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xl, wl = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (1.0 + xj)
    wu = 0.25 * wj
    v = 0.5 * (1.0 + xl)
    wv = 0.5 * wl
    U, V = np.meshgrid(u, v, indexing="ij")
    pts = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    w = np.outer(wu, wv).ravel()
    return QuadRule(pts, w, degree)


@lru_cache(maxsize=None)
def edge_quadrature(npoints: int) -> QuadRule:
    """Gauss-Legendre rule on [0, 1]."""
    if not 1 <= npoints <= MAX_DEGREE:
        raise ValueError(f"unsupported number of edge points {npoints} (1..{MAX_DEGREE})")
    x, w = np.polynomial.legendre.leggauss(npoints)
    return QuadRule(0.5 * (x + 1.0), 0.5 * w, 2 * npoints - 1)


# reference triangle data
REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REF_AREA = 0.5


def barycentric(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    xi, eta = points[:, 0], points[:, 1]
    return np.column_stack([1.0 - xi - eta, xi, eta])


_BARY_GRAD = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class BasisEval:
    """``values[q, i]`` and reference gradients ``grads[q, i, :]`` of basis
    function ``i`` at point ``q``.  For RT0, ``values`` is (nq, 3, 2) and
    ``div`` holds the (constant) reference divergence."""

    family: str
    values: np.ndarray
    grads: np.ndarray | None = None
    div: np.ndarray | None = None


def eval_basis(family: str, points: np.ndarray) -> BasisEval:
    """Evaluate a reference basis.

    P2 ordering: three vertex functions, then the midpoint functions of the
    local edges 0, 1, 2 (edge k is opposite vertex k).  RT0 function k belongs
    to local edge k and is normalised to unit total outward flux through it.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lam = barycentric(points)
    nq = len(points)
    if family == "P0":
        return BasisEval("P0", np.ones((nq, 1)), np.zeros((nq, 1, 2)))
    if family == "P1":
        return BasisEval("P1", lam, np.broadcast_to(_BARY_GRAD, (nq, 3, 2)).copy())
    if family == "P2":
        vals = np.empty((nq, 6))
        grads = np.empty((nq, 6, 2))
        for i in range(3):
            vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * _BARY_GRAD[i]
        for k in range(3):
            a, b = (k + 1) % 3, (k + 2) % 3
            vals[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
            grads[:, 3 + k] = 4.0 * (
                lam[:, b][:, None] * _BARY_GRAD[a] + lam[:, a][:, None] * _BARY_GRAD[b]
            )
        return BasisEval("P2", vals, grads)
    if family == "RT0":
        vals = (points[:, None, :] - REF_VERTICES[None, :, :]) / (2.0 * REF_AREA)
        return BasisEval("RT0", vals, div=np.full(3, 2.0 / (2.0 * REF_AREA)))
    raise ValueError(f"unknown family {family!r}")


def edge_points(k: int, t: np.ndarray) -> np.ndarray:
    """Reference coordinates of parameter ``t`` on local edge ``k``,
    running from vertex (k+1)%3 to (k+2)%3."""
    a = REF_VERTICES[(k + 1) % 3]
    b = REF_VERTICES[(k + 2) % 3]
    return a + np.asarray(t)[:, None] * (b - a)


@dataclass(frozen=True, eq=False)
class RT0Function:
    """Lowest-order Raviart-Thomas field given by its constant normal trace
    on every skeleton edge, measured against the fixed edge normal."""

    skeleton: Skeleton
    coefficients: np.ndarray

    def evaluate(self, ref_points: np.ndarray) -> np.ndarray:
        """Values at the mapped reference points of every triangle, (nT, nq, 2)."""
        mesh = self.skeleton.mesh
        coords = mesh.coords()
        area = mesh.areas()
        lam = barycentric(ref_points)
        x = np.einsum("qi,tid->tqd", lam, coords)
        flux = self.coefficients[mesh.triangle_edges] * self.skeleton.signs
        flux = flux * self.skeleton.lengths[mesh.triangle_edges]  # total outward flux
        out = np.zeros(x.shape)
        for k in range(3):
            out += (flux[:, k] / (2.0 * area))[:, None, None] * (x - coords[:, None, k, :])
        return out

    def divergence(self) -> np.ndarray:
        mesh = self.skeleton.mesh
        flux = self.coefficients[mesh.triangle_edges] * self.skeleton.signs
        flux = flux * self.skeleton.lengths[mesh.triangle_edges]
        return flux.sum(axis=1) / mesh.areas()


COMPONENTS = ("u1", "sigma", "uhat", "sighat", "u2")


@dataclass(frozen=True, eq=False)
class DofMap:
    """Global numbering of (u1, sigma, uhat, sighat, u2).

    Free unknowns get indices ``0..N-1``.  Dirichlet unknowns are numbered
    after them, ``N..N+nD-1``, and carry the lifted values
    ``dirichlet_values[i - N]``.

    * ``u1_index[t]`` and ``sigma_index[t, c]`` for triangle ``t`` of mesh 1,
    * ``uhat_index[v]`` for every vertex of mesh 1,
    * ``sighat_index[e]`` for every edge of mesh 1,
    * ``u2_index[v]`` for every vertex of mesh 2; in strong mode interface
      vertices reuse the index of the matching ``uhat`` unknown.
    """

    coupling_mode: str
    offsets: dict
    counts: dict
    u1_index: np.ndarray
    sigma_index: np.ndarray
    uhat_index: np.ndarray
    sighat_index: np.ndarray
    u2_index: np.ndarray
    dirichlet_values: np.ndarray

    @property
    def N(self) -> int:
        return sum(self.counts.values())

    @property
    def n_dirichlet(self) -> int:
        return len(self.dirichlet_values)

    @property
    def n_total(self) -> int:
        return self.N + self.n_dirichlet

    def component_slice(self, name: str) -> slice:
        return slice(self.offsets[name], self.offsets[name] + self.counts[name])

    def element_dofs(self, mesh1: Mesh) -> np.ndarray:
        """Extended global indices of the 9 local trial unknowns per triangle."""
        return np.column_stack([
            self.u1_index,
            self.sigma_index,
            self.uhat_index[mesh1.triangles],
            self.sighat_index[mesh1.triangle_edges],
        ])

    def extend(self, x: np.ndarray) -> np.ndarray:
        """Append the lifted Dirichlet values to a free-unknown vector."""
        return np.concatenate([x, self.dirichlet_values])


def build_dof_map(
    mesh1: Mesh,
    skeleton: Skeleton,
    tags: BoundaryTags,
    mesh2: Mesh,
    coupling_mode: str = "weak",
    dirichlet: Callable | None = None,
) -> DofMap:
    """Number the unknowns; ``dirichlet(x, y)`` supplies lifted boundary values
    (zero when omitted)."""
    if coupling_mode not in ("weak", "strong"):
        raise ValueError(f"coupling_mode must be 'weak' or 'strong', got {coupling_mode!r}")
    nT1 = mesh1.n_triangles
    counts, offsets = {}, {}
    pos = 0

    offsets["u1"] = pos
    counts["u1"] = nT1
    u1_index = np.arange(nT1) + pos
    pos += nT1

    offsets["sigma"] = pos
    counts["sigma"] = 2 * nT1
    sigma_index = np.column_stack([np.arange(nT1), nT1 + np.arange(nT1)]) + pos
    pos += 2 * nT1

    free1 = tags.vertex_tags1 != Tag.GAMMA1
    offsets["uhat"] = pos
    counts["uhat"] = int(free1.sum())
    uhat_index = np.full(mesh1.n_vertices, -1, dtype=np.int64)
    uhat_index[free1] = pos + np.arange(counts["uhat"])
    pos += counts["uhat"]

    offsets["sighat"] = pos
    counts["sighat"] = skeleton.n_edges
    sighat_index = pos + np.arange(skeleton.n_edges)
    pos += skeleton.n_edges

    free2 = tags.vertex_tags2 != Tag.GAMMA2
    u2_index = np.full(mesh2.n_vertices, -1, dtype=np.int64)
    if coupling_mode == "strong":
        pairs = tags.gamma_vertices
        inner = (tags.vertex_tags1[pairs[:, 0]] == Tag.GAMMA) & (
            tags.vertex_tags2[pairs[:, 1]] == Tag.GAMMA
        )
        if np.any((tags.vertex_tags1[pairs[:, 0]] == Tag.GAMMA) != (tags.vertex_tags2[pairs[:, 1]] == Tag.GAMMA)):
            raise ValueError("interface vertex sets of the two meshes do not match")
        u2_index[pairs[inner, 1]] = uhat_index[pairs[inner, 0]]
        own = free2.copy()
        own[pairs[inner, 1]] = False
    else:
        own = free2
    offsets["u2"] = pos
    counts["u2"] = int(own.sum())
    u2_index[own] = pos + np.arange(counts["u2"])
    pos += counts["u2"]

    d1 = np.flatnonzero(~free1)
    d2 = np.flatnonzero(~free2)
    uhat_index[d1] = pos + np.arange(len(d1))
    u2_index[d2] = pos + len(d1) + np.arange(len(d2))
    pts = np.vstack([mesh1.vertices[d1], mesh2.vertices[d2]])
    if dirichlet is None:
        values = np.zeros(len(pts))
    else:
        values = np.asarray(dirichlet(pts[:, 0], pts[:, 1]), dtype=float).reshape(len(pts))
    return DofMap(
        coupling_mode, offsets, counts, u1_index, sigma_index,
        uhat_index, sighat_index, u2_index, values,
    )
