"""Structured triangular meshes on rectangles, the DPG skeleton and boundary tags.

Local conventions used throughout the package:

* triangles are stored counter-clockwise;
* local edge ``k`` of a triangle is the edge opposite its local vertex ``k``,
  running from vertex ``(k+1) % 3`` to vertex ``(k+2) % 3``;
* edges are stored as sorted vertex pairs, numbered lexicographically.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np


class Tag(IntEnum):
    INTERIOR = 0
    GAMMA = 1  # coupling interface
    GAMMA1 = 2  # Dirichlet boundary of the DPG subdomain
    GAMMA2 = 3  # Dirichlet boundary of the FEM subdomain


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.width, self.height))

    def on_boundary(self, pts: np.ndarray, tol: float) -> np.ndarray:
        x, y = pts[..., 0], pts[..., 1]
        return (
            (np.abs(x - self.x0) <= tol)
            | (np.abs(x - self.x1) <= tol)
            | (np.abs(y - self.y0) <= tol)
            | (np.abs(y - self.y1) <= tol)
        )


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation.

    Attributes
    ----------
    vertices : (nV, 2) float array
    triangles : (nT, 3) int array, counter-clockwise
    edges : (nE, 2) int array of sorted vertex pairs
    edge_triangles : (nE, 2) int array, adjacent triangles in increasing
        order; the second entry is -1 for boundary edges
    triangle_edges : (nT, 3) int array, global index of local edge k
    h : maximal edge length
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_triangles: np.ndarray
    triangle_edges: np.ndarray
    h: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def coords(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape (nT, 3, 2)."""
        return self.vertices[self.triangles]

    def areas(self) -> np.ndarray:
        return signed_areas(self.coords())

    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_triangles[:, 1] < 0)


def signed_areas(coords: np.ndarray) -> np.ndarray:
    d1 = coords[..., 1, :] - coords[..., 0, :]
    d2 = coords[..., 2, :] - coords[..., 0, :]
    return 0.5 * (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])


def mesh_from_triangles(vertices: np.ndarray, triangles: np.ndarray) -> Mesh:
    """Build edge connectivity for a counter-clockwise triangulation."""
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    if np.any(signed_areas(vertices[triangles]) <= 0.0):
        raise ValueError("triangles must be non-degenerate and counter-clockwise")
    nT = len(triangles)
    local = np.stack(
        [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1
    )  # (nT, 3, 2), local edge k opposite vertex k
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    triangle_edges = inverse.reshape(nT, 3)

    owner = np.repeat(np.arange(nT), 3)
    order = np.lexsort((owner, inverse))
    counts = np.bincount(inverse, minlength=len(edges))
    if np.any(counts > 2):
        raise ValueError("non-manifold edge in triangulation")
    start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
    edge_triangles[:, 0] = owner[order][start]
    two = counts == 2
    edge_triangles[two, 1] = owner[order][start[two] + 1]

    p = vertices[edges]
    h = float(np.max(np.linalg.norm(p[:, 1] - p[:, 0], axis=1)))
    return Mesh(vertices, triangles, edges, edge_triangles, triangle_edges, h)


def build_rect_mesh(rect: Rect, nx: int, ny: int) -> Mesh:
    """Split an ``nx`` x ``ny`` grid of cells on ``rect`` along the
    lower-left to upper-right diagonals."""
    if int(nx) < 1 or int(ny) < 1:
        raise ValueError(f"need nx, ny >= 1, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(rect.x0, rect.x1, nx + 1)
    ys = np.linspace(rect.y0, rect.y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return mesh_from_triangles(vertices, triangles)


@dataclass(frozen=True, eq=False)
class Skeleton:
    """Edge-wise representation of the element boundaries of a mesh.

    ``normals[e]`` is the fixed unit normal of edge ``e``: the outward normal
    of its lower-indexed triangle (outward for boundary edges).
    ``signs[t, k]`` relates it to the outward normal of triangle ``t`` on its
    local edge ``k``: ``signs[t, k] * normals[triangle_edges[t, k]] == n_T``.
    """

    mesh: Mesh
    normals: np.ndarray
    lengths: np.ndarray
    signs: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.normals)


def outward_normals(coords: np.ndarray) -> np.ndarray:
    """Outward unit normals on the three local edges, shape (..., 3, 2)."""
    a = np.roll(coords, -1, axis=-2)
    b = np.roll(coords, -2, axis=-2)
    t = b - a
    n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def extract_skeleton(mesh: Mesh) -> Skeleton:
    nT = mesh.n_triangles
    n_local = outward_normals(mesh.coords())
    first = mesh.edge_triangles[:, 0]
    # local position of each edge inside its first triangle
    k_first = np.argmax(mesh.triangle_edges[first] == np.arange(mesh.n_edges)[:, None], axis=1)
    normals = n_local[first, k_first]
    signs = np.where(first[mesh.triangle_edges] == np.arange(nT)[:, None], 1.0, -1.0)
    return Skeleton(mesh, normals, mesh.edge_lengths(), signs)


@dataclass(frozen=True, eq=False)
class BoundaryTags:
    """Entity tags on both meshes plus the matching of interface entities.

    ``gamma_vertices`` pairs (mesh1 vertex, mesh2 vertex) on the closed
    interface, ordered along it; ``gamma_edges`` pairs (mesh1 edge, mesh2 edge)
    in the same order.
    """

    edge_tags1: np.ndarray
    vertex_tags1: np.ndarray
    edge_tags2: np.ndarray
    vertex_tags2: np.ndarray
    gamma_vertices: np.ndarray
    gamma_edges: np.ndarray
    gamma_start: np.ndarray
    gamma_direction: np.ndarray


def _shared_segment(r1: Rect, r2: Rect, tol: float):
    if abs(r1.x1 - r2.x0) <= tol and abs(r1.y0 - r2.y0) <= tol and abs(r1.y1 - r2.y1) <= tol:
        return np.array([r1.x1, r1.y0]), np.array([r1.x1, r1.y1])
    if abs(r2.x1 - r1.x0) <= tol and abs(r1.y0 - r2.y0) <= tol and abs(r1.y1 - r2.y1) <= tol:
        return np.array([r1.x0, r1.y0]), np.array([r1.x0, r1.y1])
    if abs(r1.y1 - r2.y0) <= tol and abs(r1.x0 - r2.x0) <= tol and abs(r1.x1 - r2.x1) <= tol:
        return np.array([r1.x0, r1.y1]), np.array([r1.x1, r1.y1])
    if abs(r2.y1 - r1.y0) <= tol and abs(r1.x0 - r2.x0) <= tol and abs(r1.x1 - r2.x1) <= tol:
        return np.array([r1.x0, r1.y0]), np.array([r1.x1, r1.y0])
    raise ValueError("rectangles must share exactly one full edge")


def _segment_param(pts, a, b, tol):
    d = b - a
    L = np.linalg.norm(d)
    rel = pts - a
    s = rel @ d / L
    off = np.abs(rel[..., 0] * d[1] - rel[..., 1] * d[0]) / L
    inside = (off <= tol) & (s >= -tol) & (s <= L + tol)
    return s, inside


def _tag_mesh(mesh: Mesh, rect: Rect, a, b, tol, dirichlet: Tag):
    mids = mesh.vertices[mesh.edges].mean(axis=1)
    boundary = mesh.edge_triangles[:, 1] < 0
    _, on_gamma = _segment_param(mids, a, b, tol)
    edge_tags = np.full(mesh.n_edges, Tag.INTERIOR, dtype=np.int8)
    edge_tags[boundary & on_gamma] = Tag.GAMMA
    edge_tags[boundary & ~on_gamma] = dirichlet

    vertex_tags = np.full(mesh.n_vertices, Tag.INTERIOR, dtype=np.int8)
    gv = mesh.edges[edge_tags == Tag.GAMMA].ravel()
    vertex_tags[gv] = Tag.GAMMA
    dv = mesh.edges[edge_tags == dirichlet].ravel()
    vertex_tags[dv] = dirichlet  # Dirichlet wins at corners
    return edge_tags, vertex_tags


def classify_boundary(mesh1: Mesh, mesh2: Mesh, rect1: Rect, rect2: Rect) -> BoundaryTags:
    """Tag interface and Dirichlet entities and match the interface traces."""
    tol = 1e-12 * max(rect1.diameter, rect2.diameter)
    a, b = _shared_segment(rect1, rect2, tol)
    et1, vt1 = _tag_mesh(mesh1, rect1, a, b, tol, Tag.GAMMA1)
    et2, vt2 = _tag_mesh(mesh2, rect2, a, b, tol, Tag.GAMMA2)

    def closed_gamma_vertices(mesh, et):
        v = np.unique(mesh.edges[et == Tag.GAMMA].ravel())
        s, _ = _segment_param(mesh.vertices[v], a, b, tol)
        order = np.argsort(s)
        return v[order], s[order]

    v1, s1 = closed_gamma_vertices(mesh1, et1)
    v2, s2 = closed_gamma_vertices(mesh2, et2)
    if len(v1) != len(v2) or np.max(
        np.linalg.norm(mesh1.vertices[v1] - mesh2.vertices[v2], axis=1), initial=0.0
    ) > tol:
        raise ValueError("interface traces of the two meshes are not compatible")

    e1 = np.flatnonzero(et1 == Tag.GAMMA)
    e2 = np.flatnonzero(et2 == Tag.GAMMA)
    m1 = mesh1.vertices[mesh1.edges[e1]].mean(axis=1)
    m2 = mesh2.vertices[mesh2.edges[e2]].mean(axis=1)
    e1 = e1[np.argsort(_segment_param(m1, a, b, tol)[0])]
    e2 = e2[np.argsort(_segment_param(m2, a, b, tol)[0])]
    direction = (b - a) / np.linalg.norm(b - a)
    return BoundaryTags(
        et1, vt1, et2, vt2,
        np.column_stack([v1, v2]), np.column_stack([e1, e2]), a, direction,
    )


def dump_mesh(path, mesh: Mesh, edge_tags=None, vertex_tags=None) -> None:
    """Write a plain-text listing of a mesh.

    Sections ``VERTICES n``, ``TRIANGLES n``, ``EDGES n`` follow each other;
    vertex lines are ``x y tag``, triangle lines ``i j k``, edge lines
    ``i j t0 t1 tag`` (``t1 = -1`` on the boundary).
    """
    if edge_tags is None:
        edge_tags = np.zeros(mesh.n_edges, dtype=int)
    if vertex_tags is None:
        vertex_tags = np.zeros(mesh.n_vertices, dtype=int)
    lines = [f"VERTICES {mesh.n_vertices}"]
    lines += [f"{x:.17g} {y:.17g} {int(t)}" for (x, y), t in zip(mesh.vertices, vertex_tags)]
    lines.append(f"TRIANGLES {mesh.n_triangles}")
    lines += [" ".join(map(str, t)) for t in mesh.triangles]
    lines.append(f"EDGES {mesh.n_edges}")
    lines += [
        f"{e[0]} {e[1]} {t[0]} {t[1]} {int(g)}"
        for e, t, g in zip(mesh.edges, mesh.edge_triangles, edge_tags)
    ]
    Path(path).write_text("\n".join(lines) + "\n")
