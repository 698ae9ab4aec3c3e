"""Global assembly of the coupled DPG-FEM system.

Blocks are assembled over the extended numbering of :class:`DofMap` (free
unknowns first, Dirichlet unknowns after them).  :func:`assemble` adds the
blocks and eliminates the Dirichlet columns with the lifted values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dpg_local import LocalSystems, build_local_systems
from .fespace import (
    DEFAULT_EDGE_POINTS,
    DEFAULT_QUAD_DEGREE,
    DofMap,
    barycentric,
    build_dof_map,
    edge_quadrature,
    eval_basis,
    triangle_quadrature,
)
from .mesh import BoundaryTags, Mesh, Skeleton, build_rect_mesh, classify_boundary, extract_skeleton
from .problem import ProblemDef


@dataclass(frozen=True, eq=False)
class Discretization:
    mesh1: Mesh
    mesh2: Mesh
    skeleton: Skeleton
    tags: BoundaryTags
    dofmap: DofMap

    @property
    def h(self) -> float:
        return max(self.mesh1.h, self.mesh2.h)


def cells_per_side(problem: ProblemDef, n: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Cell counts for both rectangles: ``n`` cells across the shorter side of
    the first rectangle, other sides scaled to keep the cells square."""
    base = min(problem.rect1.width, problem.rect1.height)

    def count(length):
        return max(1, int(round(n * length / base)))

    r1, r2 = problem.rect1, problem.rect2
    return (count(r1.width), count(r1.height)), (count(r2.width), count(r2.height))


def discretize(problem: ProblemDef, n: int, coupling_mode: str = "weak") -> Discretization:
    (nx1, ny1), (nx2, ny2) = cells_per_side(problem, n)
    mesh1 = build_rect_mesh(problem.rect1, nx1, ny1)
    mesh2 = build_rect_mesh(problem.rect2, nx2, ny2)
    skeleton = extract_skeleton(mesh1)
    tags = classify_boundary(mesh1, mesh2, problem.rect1, problem.rect2)
    dirichlet = None if problem.homogeneous_dirichlet else problem.dirichlet
    dofmap = build_dof_map(mesh1, skeleton, tags, mesh2, coupling_mode, dirichlet)
    return Discretization(mesh1, mesh2, skeleton, tags, dofmap)


@dataclass(frozen=True, eq=False)
class Block:
    """A bilinear-form block and its load over the extended numbering."""

    matrix: sp.csr_matrix
    load: np.ndarray


def _block(rows, cols, vals, load, n) -> Block:
    A = sp.coo_matrix(
        (np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=(n, n)
    ).tocsr()
    return Block(A, load)


def _scatter(index, values, n):
    out = np.zeros(n)
    np.add.at(out, np.ravel(index), np.ravel(values))
    return out


def assemble_dpg_block(
    mesh1: Mesh,
    skeleton: Skeleton,
    dofmap: DofMap,
    problem: ProblemDef,
    kappa: float = 1.0,
    quad_degree: int = DEFAULT_QUAD_DEGREE,
    edge_points: int = DEFAULT_EDGE_POINTS,
) -> tuple[Block, LocalSystems]:
    """kappa * sum_T B_T^T G_T^{-1} B_T and the matching load."""
    local = build_local_systems(
        mesh1.coords(),
        problem.coefficients,
        problem.f,
        skeleton.signs,
        triangle_quadrature(quad_degree),
        edge_quadrature(edge_points),
    )
    dofs = dofmap.element_dofs(mesh1)
    n = dofmap.n_total
    rows = np.repeat(dofs[:, :, None], 9, axis=2)
    cols = np.repeat(dofs[:, None, :], 9, axis=1)
    block = _block(rows, cols, kappa * local.stiffness, _scatter(dofs, kappa * local.load, n), n)
    return block, local


def assemble_c2_block(
    mesh2: Mesh,
    dofmap: DofMap,
    problem: ProblemDef,
    quad_degree: int = DEFAULT_QUAD_DEGREE,
) -> Block:
    """P1 matrix of (alpha grad u - beta u, grad w) + (gamma u, w) on mesh 2
    (row = test, column = trial) and the load (f, w)."""
    quad = triangle_quadrature(quad_degree)
    coords = mesh2.coords()
    area = mesh2.areas()
    lam = eval_basis("P1", quad.points).values  # (nq, 3)
    J = np.stack([coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 0]], axis=-1)
    inv_t = np.swapaxes(np.linalg.inv(J), -1, -2)
    grads = np.einsum("tab,ib->tia", inv_t, eval_basis("P1", quad.points[:1]).grads[0])
    X = np.einsum("qi,tid->tqd", barycentric(quad.points), coords)
    x, y = X[..., 0], X[..., 1]
    c = problem.coefficients
    w = 2.0 * area[:, None] * quad.weights[None, :]
    alpha = np.asarray(c.alpha(x, y))
    beta = np.asarray(c.beta(x, y))
    gamma = np.asarray(c.gamma(x, y))

    K = np.einsum("tq,tqab,tjb,tia->tij", w, alpha, grads, grads)
    K -= np.einsum("tq,qj,tqa,tia->tij", w, lam, beta, grads)
    K += np.einsum("tq,tq,qj,qi->tij", w, gamma, lam, lam)
    F = np.einsum("tq,tq,qi->ti", w, np.asarray(problem.f(x, y), dtype=float), lam)

    dofs = dofmap.u2_index[mesh2.triangles]
    n = dofmap.n_total
    rows = np.repeat(dofs[:, :, None], 3, axis=2)
    cols = np.repeat(dofs[:, None, :], 3, axis=1)
    return _block(rows, cols, K, _scatter(dofs, F, n), n)


def assemble_d_block(
    mesh1: Mesh,
    skeleton: Skeleton,
    tags: BoundaryTags,
    mesh2: Mesh,
    dofmap: DofMap,
    problem: ProblemDef,
    coupling_mode: str | None = None,
    edge_points: int = DEFAULT_EDGE_POINTS,
) -> Block:
    """Interface coupling.

    weak:   <sighat, w2> + <chihat, uhat - u2> + 1/2 <beta.n (uhat - u2), what + w2>
    strong: <sighat, w2>
    with n the unit normal of the DPG subdomain on the interface.
    """
    mode = dofmap.coupling_mode if coupling_mode is None else coupling_mode
    if mode != dofmap.coupling_mode:
        raise ValueError(f"coupling mode {mode!r} does not match the dof map ({dofmap.coupling_mode!r})")
    n = dofmap.n_total
    e1, e2 = tags.gamma_edges[:, 0], tags.gamma_edges[:, 1]
    if len(e1) == 0:
        return _block([], [], [], np.zeros(n), n)

    to2 = np.full(mesh1.n_vertices, -1, dtype=np.int64)
    to2[tags.gamma_vertices[:, 0]] = tags.gamma_vertices[:, 1]
    a1, b1 = mesh1.edges[e1, 0], mesh1.edges[e1, 1]
    a2, b2 = to2[a1], to2[b1]
    if np.any(a2 < 0) or np.any(b2 < 0):
        raise ValueError("interface edge without matching vertices on mesh 2")

    pa, pb = mesh1.vertices[a1], mesh1.vertices[b1]
    ell = np.linalg.norm(pb - pa, axis=1)
    # normal of the DPG side pointing into the FEM side
    toward2 = mesh2.vertices.mean(axis=0) - mesh1.vertices.mean(axis=0)
    normal = skeleton.normals[e1]
    if np.any(normal @ toward2 <= 0.0):
        raise AssertionError("interface skeleton normals must point out of the DPG subdomain")

    eq = edge_quadrature(edge_points)
    t = eq.points
    psi = np.column_stack([1.0 - t, t])  # (ne, 2) traces of the hat functions
    we = ell[:, None] * eq.weights[None, :]  # (nG, ne)
    mass1 = np.einsum("ge,ei->gi", we, psi)  # int psi_i

    uhat = np.column_stack([dofmap.uhat_index[a1], dofmap.uhat_index[b1]])
    u2 = np.column_stack([dofmap.u2_index[a2], dofmap.u2_index[b2]])
    sig = dofmap.sighat_index[e1]

    rows, cols, vals = [], [], []
    # <sighat, w2>
    rows.append(u2)
    cols.append(np.repeat(sig[:, None], 2, axis=1))
    vals.append(mass1)
    if mode == "weak":
        # <chihat, uhat - u2>
        rows += [np.repeat(sig[:, None], 2, axis=1)] * 2
        cols += [uhat, u2]
        vals += [mass1, -mass1]
        # 1/2 <beta.n (uhat - u2), what + w2>
        X = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
        bn = np.einsum("gea,ga->ge", np.asarray(problem.coefficients.beta(X[..., 0], X[..., 1])), normal)
        m = 0.5 * np.einsum("ge,ge,ei,ej->gij", we, bn, psi, psi)  # (nG, 2, 2)
        tr = np.concatenate([uhat, u2], axis=1)  # (nG, 4)
        sign = np.array([1.0, 1.0, -1.0, -1.0])
        M4 = np.tile(m, (1, 2, 2)) * sign[None, None, :]
        rows.append(np.repeat(tr[:, :, None], 4, axis=2))
        cols.append(np.repeat(tr[:, None, :], 4, axis=1))
        vals.append(M4)
    rows = np.concatenate([np.ravel(r) for r in rows])
    cols = np.concatenate([np.ravel(c) for c in cols])
    vals = np.concatenate([np.ravel(v) for v in vals])
    return _block(rows, cols, vals, np.zeros(n), n)


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Reduced system ``matrix @ x = rhs`` for the N free unknowns."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    kappa: float
    blocks: dict = field(default_factory=dict)
    local: LocalSystems | None = None
    discretization: Discretization | None = None


def eliminate(full: sp.csr_matrix, load: np.ndarray, dofmap: DofMap) -> tuple[sp.csr_matrix, np.ndarray]:
    N = dofmap.N
    A = full[:N, :N].tocsr()
    b = load[:N] - full[:N, N:] @ dofmap.dirichlet_values
    return A, b


def assemble(
    disc: Discretization,
    problem: ProblemDef,
    kappa: float = 1.0,
    quad_degree: int = DEFAULT_QUAD_DEGREE,
    edge_points: int = DEFAULT_EDGE_POINTS,
) -> SparseSystem:
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    dpg, local = assemble_dpg_block(
        disc.mesh1, disc.skeleton, disc.dofmap, problem, kappa, quad_degree, edge_points
    )
    c2 = assemble_c2_block(disc.mesh2, disc.dofmap, problem, quad_degree)
    d = assemble_d_block(
        disc.mesh1, disc.skeleton, disc.tags, disc.mesh2, disc.dofmap, problem,
        edge_points=edge_points,
    )
    full = dpg.matrix + c2.matrix + d.matrix
    load = dpg.load + c2.load + d.load
    A, b = eliminate(full.tocsr(), load, disc.dofmap)
    return SparseSystem(
        A, b, disc.dofmap, kappa, {"dpg": dpg, "c2": c2, "d": d}, local, disc
    )


def dump_matrix(path, matrix: sp.spmatrix) -> None:
    """Coordinate text format: a header ``nrows ncols nnz``, then ``row col value`` lines."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    lines = [f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}"]
    lines += [
        f"{r} {c} {v:.17g}" for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order])
    ]
    Path(path).write_text("\n".join(lines) + "\n")
