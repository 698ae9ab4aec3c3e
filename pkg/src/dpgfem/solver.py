"""Sparse solve, interpolants, error quantities and convergence rates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .assembly import Discretization, SparseSystem
from .dpg_local import LocalSystems
from .fespace import (
    DEFAULT_EDGE_POINTS,
    DEFAULT_QUAD_DEGREE,
    MAX_DEGREE,
    DofMap,
    RT0Function,
    barycentric,
    edge_quadrature,
    triangle_quadrature,
)
from .mesh import Mesh, Skeleton
from .problem import ProblemDef

RESIDUAL_TOL = 1e-10
ERROR_NAMES = ("err_u1", "err_sigma", "err_u2", "err_uhat", "err_sighat", "err_energy", "jump_L2")


class SingularMatrixError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, residual: float):
        super().__init__(f"relative residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class SolutionVector:
    x: np.ndarray
    dofmap: DofMap

    @property
    def extended(self) -> np.ndarray:
        return self.dofmap.extend(self.x)

    @property
    def u1(self) -> np.ndarray:
        return self.extended[self.dofmap.u1_index]

    @property
    def sigma(self) -> np.ndarray:
        return self.extended[self.dofmap.sigma_index]

    @property
    def uhat(self) -> np.ndarray:
        """Values at every vertex of mesh 1, Dirichlet vertices included."""
        return self.extended[self.dofmap.uhat_index]

    @property
    def sighat(self) -> np.ndarray:
        return self.extended[self.dofmap.sighat_index]

    @property
    def u2(self) -> np.ndarray:
        return self.extended[self.dofmap.u2_index]

    def local(self, mesh1: Mesh) -> np.ndarray:
        """The 9 local trial coefficients of every triangle of mesh 1."""
        return self.extended[self.dofmap.element_dofs(mesh1)]


def solve_matrix(A: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    """Direct sparse LU solve with a relative residual check."""
    b = np.asarray(b, dtype=float)
    if not np.any(b):
        return np.zeros(A.shape[1])
    try:
        lu = splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("non-finite solution")
    res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
    if res > RESIDUAL_TOL:
        # one step of iterative refinement before giving up
        x = x + lu.solve(b - A @ x)
        res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
        if res > RESIDUAL_TOL:
            raise ConvergenceError(res)
    return x


def solve(system: SparseSystem) -> SolutionVector:
    return SolutionVector(solve_matrix(system.matrix, system.rhs), system.dofmap)


@dataclass(frozen=True, eq=False)
class P1Field:
    """Continuous piecewise affine field given by vertex values."""

    mesh: Mesh
    values: np.ndarray

    def evaluate(self, ref_points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values (nT, nq) and gradients (nT, 2) at mapped reference points."""
        lam = barycentric(ref_points)
        vt = self.values[self.mesh.triangles]
        return np.einsum("qi,ti->tq", lam, vt), p1_gradients(self.mesh, vt)


def p1_gradients(mesh: Mesh, vertex_values: np.ndarray) -> np.ndarray:
    coords = mesh.coords()
    J = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=-1)
    ref = np.stack([vertex_values[:, 1] - vertex_values[:, 0], vertex_values[:, 2] - vertex_values[:, 0]], axis=-1)
    # grad = J^{-T} (reference gradient)
    return np.linalg.solve(np.swapaxes(J, -1, -2), ref[..., None])[..., 0]


def nodal_interpolant(uhat: np.ndarray, mesh1: Mesh) -> P1Field:
    uhat = np.asarray(uhat, dtype=float)
    if uhat.shape != (mesh1.n_vertices,):
        raise ValueError("need one value per mesh vertex")
    return P1Field(mesh1, uhat)


def rt_interpolant(sighat: np.ndarray, mesh1: Mesh, skeleton: Skeleton) -> RT0Function:
    sighat = np.asarray(sighat, dtype=float)
    if sighat.shape != (mesh1.n_edges,):
        raise ValueError("need one value per skeleton edge")
    return RT0Function(skeleton, sighat)


def _volume_rule(mesh: Mesh, degree: int):
    quad = triangle_quadrature(min(degree, MAX_DEGREE))
    X = np.einsum("qi,tid->tqd", barycentric(quad.points), mesh.coords())
    w = 2.0 * mesh.areas()[:, None] * quad.weights[None, :]
    return quad, X, w


def h1_error(field: P1Field, u, grad_u, degree: int) -> float:
    quad, X, w = _volume_rule(field.mesh, degree)
    vals, grads = field.evaluate(quad.points)
    x, y = X[..., 0], X[..., 1]
    e0 = u(x, y) - vals
    e1 = grad_u(x, y) - grads[:, None, :]
    return math.sqrt(float(np.sum(w * (e0**2 + np.sum(e1**2, axis=-1)))))


def hdiv_error(field: RT0Function, sigma, div_sigma, degree: int) -> float:
    quad, X, w = _volume_rule(field.skeleton.mesh, degree)
    x, y = X[..., 0], X[..., 1]
    e0 = sigma(x, y) - field.evaluate(quad.points)
    e1 = div_sigma(x, y) - field.divergence()[:, None]
    return math.sqrt(float(np.sum(w * (np.sum(e0**2, axis=-1) + e1**2))))


def energy_error(local: LocalSystems, x_local: np.ndarray, kappa: float = 1.0) -> float:
    """kappa * sqrt(sum_T r_T^T G_T^{-1} r_T)."""
    return kappa * math.sqrt(float(np.sum(local.residuals(x_local))))


def energy_error_theta(local: LocalSystems, x_local: np.ndarray, kappa: float = 1.0) -> float:
    """Same quantity via the discrete trial-to-test image: theta = G^{-1} r
    in test-space coordinates, then its V-norm sqrt(theta^T G theta)."""
    r = local.f - np.einsum("tij,tj->ti", local.B, x_local)
    theta = np.linalg.solve(local.G, r[..., None])[..., 0]
    return kappa * math.sqrt(float(np.einsum("ti,tij,tj->", theta, local.G, theta)))


@dataclass(frozen=True)
class ErrorReport:
    err_u1: float
    err_sigma: float
    err_u2: float
    err_uhat: float
    err_sighat: float
    err_energy: float
    jump_L2: float
    N: int
    h: float

    def errors(self) -> dict:
        return {name: getattr(self, name) for name in ERROR_NAMES}


def _interface_traces(sol: SolutionVector, disc: Discretization):
    tags, m1 = disc.tags, disc.mesh1
    e1 = tags.gamma_edges[:, 0]
    to2 = np.full(m1.n_vertices, -1, dtype=np.int64)
    to2[tags.gamma_vertices[:, 0]] = tags.gamma_vertices[:, 1]
    a1, b1 = m1.edges[e1, 0], m1.edges[e1, 1]
    uhat, u2 = sol.uhat, sol.u2
    ja = uhat[a1] - u2[to2[a1]]
    jb = uhat[b1] - u2[to2[b1]]
    return m1.vertices[a1], m1.vertices[b1], ja, jb


def jump_l2(sol: SolutionVector, disc: Discretization, edge_points: int = DEFAULT_EDGE_POINTS) -> float:
    pa, pb, ja, jb = _interface_traces(sol, disc)
    eq = edge_quadrature(edge_points)
    t = eq.points
    j = ja[:, None] * (1.0 - t) + jb[:, None] * t
    ell = np.linalg.norm(pb - pa, axis=1)
    return math.sqrt(float(np.sum(ell[:, None] * eq.weights * j**2)))


def jump_samples(sol: SolutionVector, disc: Discretization, per_edge: int = 16) -> np.ndarray:
    """Rows (s, x, y, jump) with s the arc length along the interface,
    ``per_edge`` uniform samples (end points included) on every interface edge."""
    pa, pb, ja, jb = _interface_traces(sol, disc)
    t = np.linspace(0.0, 1.0, per_edge)
    X = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
    s = (X - disc.tags.gamma_start) @ disc.tags.gamma_direction
    j = ja[:, None] * (1.0 - t) + jb[:, None] * t
    out = np.column_stack([s.ravel(), X[..., 0].ravel(), X[..., 1].ravel(), j.ravel()])
    return out[np.argsort(out[:, 0], kind="stable")]


def compute_errors(
    sol: SolutionVector,
    problem: ProblemDef,
    disc: Discretization,
    local: LocalSystems,
    kappa: float = 1.0,
    quad_degree: int = DEFAULT_QUAD_DEGREE,
) -> ErrorReport:
    """All error quantities of a solved system.

    The exact divergence of sigma is taken as gamma u - f.
    """
    ex, c = problem.exact, problem.coefficients
    m1, m2 = disc.mesh1, disc.mesh2
    degree = quad_degree + 2

    _, X, w = _volume_rule(m1, degree)
    x, y = X[..., 0], X[..., 1]
    err_u1 = math.sqrt(float(np.sum(w * (ex.u(x, y) - sol.u1[:, None]) ** 2)))
    ds = ex.sigma(x, y) - sol.sigma[:, None, :]
    err_sigma = math.sqrt(float(np.sum(w * np.sum(ds**2, axis=-1))))

    def div_sigma(x, y):
        return c.gamma(x, y) * ex.u(x, y) - ex.f(x, y)

    err_uhat = h1_error(nodal_interpolant(sol.uhat, m1), ex.u, ex.grad_u, degree)
    err_sighat = hdiv_error(rt_interpolant(sol.sighat, m1, disc.skeleton), ex.sigma, div_sigma, degree)
    err_u2 = h1_error(P1Field(m2, sol.u2), ex.u, ex.grad_u, degree)
    err_energy = energy_error(local, sol.local(m1), kappa)
    return ErrorReport(
        err_u1, err_sigma, err_u2, err_uhat, err_sighat, err_energy,
        jump_l2(sol, disc), disc.dofmap.N, disc.h,
    )


def eoc(reports: list[ErrorReport], names=ERROR_NAMES) -> dict[str, list[float | None]]:
    """Rates log(e_i / e_{i+1}) / log(N_{i+1} / N_i) between consecutive levels;
    None where an error vanishes."""
    if len(reports) < 2:
        raise ValueError("need at least two reports")
    Ns = [r.N for r in reports]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("N must increase strictly between levels")
    rates = {}
    for name in names:
        vals = [getattr(r, name) for r in reports]
        out = []
        for (e0, e1), (n0, n1) in zip(zip(vals, vals[1:]), zip(Ns, Ns[1:])):
            if e0 > 0 and e1 > 0:
                out.append(math.log(e0 / e1) / math.log(n1 / n0))
            else:
                out.append(None)
        rates[name] = out
    return rates
