"""Element-local DPG kernels for the ultra-weak formulation on the DPG subdomain.

Every routine works on a batch of triangles given as coordinates of shape
(nT, 3, 2); a single (3, 2) triangle is accepted and treated as a batch of one.

Test space per element is P2 x [P2]^2 (18 functions): rows 0-5 are the scalar
test functions ``v``, rows 6-11 the x-components of ``tau`` and rows 12-17
the y-components.  The 9 local trial unknowns are ordered

    [u1, sigma_x, sigma_y, uhat(v0), uhat(v1), uhat(v2),
     sighat(e0), sighat(e1), sighat(e2)]

where ``sighat`` is measured against the fixed skeleton normal, so its
columns carry the orientation sign of the triangle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fespace import (
    DEFAULT_EDGE_POINTS,
    DEFAULT_QUAD_DEGREE,
    QuadRule,
    barycentric,
    edge_points,
    edge_quadrature,
    eval_basis,
    triangle_quadrature,
)
from .mesh import outward_normals, signed_areas
from .problem import CoefficientFields

N_TEST = 18
N_TRIAL = 9
AREA_TOL = 1e-14


class LocalSystemError(RuntimeError):
    """Raised when an element Gram matrix cannot be factorised."""

    def __init__(self, element: int, message: str = "Gram matrix is not positive definite"):
        super().__init__(f"element {element}: {message}")
        self.element = element


class _Geometry:
    """Affine maps of a batch of triangles."""

    def __init__(self, coords: np.ndarray):
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 2:
            coords = coords[None]
        self.coords = coords
        self.area = signed_areas(coords)
        scale = np.max(np.abs(coords), axis=(1, 2)) + 1.0
        bad = np.flatnonzero(self.area <= AREA_TOL * scale**2)
        if len(bad):
            raise ValueError(f"degenerate or clockwise triangle at batch index {bad[0]}")
        J = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=-1)
        self.jac = J
        self.inv_t = np.swapaxes(np.linalg.inv(J), -1, -2)
        self.normals = outward_normals(coords)
        a = np.roll(coords, -1, axis=1)
        b = np.roll(coords, -2, axis=1)
        self.edge_lengths = np.linalg.norm(b - a, axis=-1)

    def map(self, ref_points: np.ndarray) -> np.ndarray:
        return np.einsum("qi,tid->tqd", barycentric(ref_points), self.coords)

    def weights(self, quad: QuadRule) -> np.ndarray:
        return 2.0 * self.area[:, None] * quad.weights[None, :]

    def phys_grads(self, ref_grads: np.ndarray) -> np.ndarray:
        return np.einsum("tab,qib->tqia", self.inv_t, ref_grads)


def _rules(quad, edge_quad):
    if quad is None:
        quad = triangle_quadrature(DEFAULT_QUAD_DEGREE)
    if edge_quad is None:
        edge_quad = edge_quadrature(DEFAULT_EDGE_POINTS)
    return quad, edge_quad


def local_gram(coords: np.ndarray, quad: QuadRule | None = None) -> np.ndarray:
    """Gram matrices of the H1 x H(div) inner product on P2 x [P2]^2, (nT, 18, 18)."""
    quad, _ = _rules(quad, None)
    geo = _Geometry(coords)
    basis = eval_basis("P2", quad.points)
    w = geo.weights(quad)
    g = geo.phys_grads(basis.grads)
    M = np.einsum("tq,qi,qj->tij", w, basis.values, basis.values)
    D = np.einsum("tq,tqia,tqjb->tabij", w, g, g)
    nT = len(w)
    G = np.zeros((nT, N_TEST, N_TEST))
    G[:, :6, :6] = M + D[:, 0, 0] + D[:, 1, 1]
    G[:, 6:12, 6:12] = M + D[:, 0, 0]
    G[:, 12:, 12:] = M + D[:, 1, 1]
    G[:, 6:12, 12:] = D[:, 0, 1]
    G[:, 12:, 6:12] = D[:, 1, 0]
    return G


def local_b_matrix(
    coords: np.ndarray,
    coefficients: CoefficientFields,
    signs: np.ndarray | None = None,
    quad: QuadRule | None = None,
    edge_quad: QuadRule | None = None,
) -> np.ndarray:
    """Matrix of the ultra-weak form b(trial, test) per element, (nT, 18, 9).

    ``signs[t, k]`` is the orientation of local edge k relative to its fixed
    skeleton normal (all +1 when omitted).
    """
    quad, edge_quad = _rules(quad, edge_quad)
    geo = _Geometry(coords)
    nT = len(geo.area)
    if signs is None:
        signs = np.ones((nT, 3))
    signs = np.asarray(signs, dtype=float).reshape(nT, 3)

    basis = eval_basis("P2", quad.points)
    phi = basis.values
    g = geo.phys_grads(basis.grads)  # (nT, nq, 6, 2)
    w = geo.weights(quad)
    X = geo.map(quad.points)
    x, y = X[..., 0], X[..., 1]
    A = np.asarray(coefficients.alpha_inv_T(x, y))  # (nT, nq, 2, 2)
    beta = np.asarray(coefficients.beta(x, y))
    gamma = np.asarray(coefficients.gamma(x, y))
    betaA = np.einsum("tqd,tqdc->tqc", beta, A)  # beta . (alpha^{-T} e_c)

    B = np.zeros((nT, N_TEST, N_TRIAL))
    # scalar test functions v
    B[:, :6, 0] = np.einsum("tq,tq,qi->ti", w, gamma, phi)
    B[:, :6, 1] = np.einsum("tq,tqi->ti", w, g[..., 0])
    B[:, :6, 2] = np.einsum("tq,tqi->ti", w, g[..., 1])
    # vector test functions tau = phi_i e_c
    for c in range(2):
        rows = slice(6 + 6 * c, 12 + 6 * c)
        B[:, rows, 0] = np.einsum("tq,tqi->ti", w, g[..., c]) + np.einsum(
            "tq,tq,qi->ti", w, betaA[..., c], phi
        )
        for d in range(2):
            B[:, rows, 1 + d] = np.einsum("tq,tq,qi->ti", w, A[..., d, c], phi)

    # boundary terms, edge by edge
    t = edge_quad.points
    for k in range(3):
        ref = edge_points(k, t)
        phi_e = eval_basis("P2", ref).values  # (ne, 6)
        lam_e = barycentric(ref)  # (ne, 3)
        we = geo.edge_lengths[:, k][:, None] * edge_quad.weights[None, :]  # (nT, ne)
        # -<uhat, tau . n_T>
        trace = np.einsum("te,ej,ei->tij", we, lam_e, phi_e)  # (nT, 6, 3)
        for c in range(2):
            rows = slice(6 + 6 * c, 12 + 6 * c)
            B[:, rows, 3:6] -= trace * geo.normals[:, k, c][:, None, None]
        # -<sighat, v>
        B[:, :6, 6 + k] -= signs[:, k][:, None] * np.einsum("te,ei->ti", we, phi_e)
    return B


def local_load(coords: np.ndarray, f, quad: QuadRule | None = None) -> np.ndarray:
    """Load vectors (f, v)_T for the 18 test functions, (nT, 18)."""
    quad, _ = _rules(quad, None)
    geo = _Geometry(coords)
    phi = eval_basis("P2", quad.points).values
    X = geo.map(quad.points)
    fv = np.asarray(f(X[..., 0], X[..., 1]), dtype=float)
    out = np.zeros((len(geo.area), N_TEST))
    out[:, :6] = np.einsum("tq,tq,qi->ti", geo.weights(quad), fv, phi)
    return out


def _cholesky(G: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        for i, Gi in enumerate(G):
            try:
                np.linalg.cholesky(Gi)
            except np.linalg.LinAlgError:
                raise LocalSystemError(i) from None
        raise


@dataclass(frozen=True, eq=False)
class LocalSystems:
    """Per-element DPG data.  ``W = L^{-1} B`` and ``g = L^{-1} f`` with
    ``G = L L^T``, so the condensed stiffness is ``W^T W``."""

    G: np.ndarray
    B: np.ndarray
    f: np.ndarray
    chol: np.ndarray
    W: np.ndarray
    g: np.ndarray

    @property
    def stiffness(self) -> np.ndarray:
        return np.einsum("tki,tkj->tij", self.W, self.W)

    @property
    def load(self) -> np.ndarray:
        return np.einsum("tki,tk->ti", self.W, self.g)

    def residuals(self, x_local: np.ndarray) -> np.ndarray:
        """Squared discrete dual norms of f_T - B_T x_T, shape (nT,)."""
        z = self.g - np.einsum("tij,tj->ti", self.W, x_local)
        return np.einsum("ti,ti->t", z, z)


def condense(G: np.ndarray, B: np.ndarray, f: np.ndarray) -> LocalSystems:
    """Local Riesz inversion through a Cholesky factor of G.

    The condensed matrices are ``S = B^T G^{-1} B`` and ``load = B^T G^{-1} f``
    (available as ``.stiffness`` / ``.load``).
    """
    G = np.asarray(G, dtype=float)
    B = np.asarray(B, dtype=float)
    f = np.asarray(f, dtype=float)
    single = G.ndim == 2
    if single:
        G, B, f = G[None], B[None], f[None]
    L = _cholesky(G)
    W = np.linalg.solve(L, B)
    g = np.linalg.solve(L, f[..., None])[..., 0]
    return LocalSystems(G, B, f, L, W, g)


def build_local_systems(
    coords: np.ndarray,
    coefficients: CoefficientFields,
    f,
    signs: np.ndarray | None = None,
    quad: QuadRule | None = None,
    edge_quad: QuadRule | None = None,
) -> LocalSystems:
    G = local_gram(coords, quad)
    B = local_b_matrix(coords, coefficients, signs, quad, edge_quad)
    F = local_load(coords, f, quad)
    return condense(G, B, F)


def local_energy_residual(local: LocalSystems, x_local: np.ndarray) -> np.ndarray:
    """``r^T G^{-1} r`` with ``r = f_T - B_T x_T`` for each element."""
    x_local = np.asarray(x_local, dtype=float)
    if x_local.ndim == 1:
        x_local = x_local[None]
    return local.residuals(x_local)
