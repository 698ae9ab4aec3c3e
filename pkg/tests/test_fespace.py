import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from math import factorial

from dpgfem.fespace import (
    RT0Function,
    build_dof_map,
    edge_points,
    edge_quadrature,
    eval_basis,
    triangle_quadrature,
)
from dpgfem.mesh import Rect, Tag, build_rect_mesh, classify_boundary, extract_skeleton


def exact_monomial(a, b):
    # int over reference triangle of x^a y^b
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def test_area():
    q = triangle_quadrature(1)
    assert q.weights.sum() == pytest.approx(0.5, abs=1e-15)


def test_x2y2():
    q = triangle_quadrature(4)
    x, y = q.points.T
    assert np.dot(q.weights, x**2 * y**2) == pytest.approx(1 / 180, rel=1e-14)


@pytest.mark.parametrize("degree", range(1, 11))
def test_triangle_exactness(degree):
    q = triangle_quadrature(degree)
    assert np.all(q.weights > 0)
    lam = np.column_stack([1 - q.points.sum(1), q.points])
    assert np.all(lam > 0)
    x, y = q.points.T
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = exact_monomial(a, b)
            assert abs(np.dot(q.weights, x**a * y**b) - exact) <= 1e-13 * exact


@pytest.mark.parametrize("bad", [0, 11, -1])
def test_unsupported(bad):
    with pytest.raises(ValueError):
        triangle_quadrature(bad)
    with pytest.raises(ValueError):
        edge_quadrature(bad)


def test_edge_rules():
    assert edge_quadrature(1).weights.sum() == pytest.approx(1.0)
    q = edge_quadrature(2)
    assert np.dot(q.weights, q.points**3) == pytest.approx(0.25, rel=1e-14)
    q = edge_quadrature(3)
    assert np.dot(q.weights, q.points**5) == pytest.approx(1 / 6, rel=1e-14)


@pytest.mark.parametrize("n", range(1, 11))
def test_edge_exactness(n):
    q = edge_quadrature(n)
    for k in range(2 * n):
        assert np.dot(q.weights, q.points**k) == pytest.approx(1 / (k + 1), rel=1e-13)


VERTS = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
MIDS = np.array([[0.5, 0.5], [0.0, 0.5], [0.5, 0.0]])


def test_p1_lagrange():
    assert np.allclose(eval_basis("P1", VERTS).values, np.eye(3))


def test_p2_lagrange_and_unity():
    b = eval_basis("P2", np.vstack([VERTS, MIDS]))
    assert np.allclose(b.values, np.eye(6), atol=1e-15)
    c = eval_basis("P2", np.array([[1 / 3, 1 / 3]]))
    assert c.values.sum() == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_partition_of_unity(s, t):
    pt = np.array([[s * (1 - t), t]])
    for fam in ("P1", "P2"):
        b = eval_basis(fam, pt)
        assert b.values.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.allclose(b.grads.sum(axis=1), 0.0, atol=1e-13)


def test_p2_gradients_match_differences():
    pts = np.array([[0.2, 0.3], [0.6, 0.1]])
    h = 1e-6
    b = eval_basis("P2", pts)
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (eval_basis("P2", pts + e).values - eval_basis("P2", pts - e).values) / (2 * h)
        assert np.allclose(b.grads[..., d], fd, atol=1e-8)


def test_rt0_normalisation():
    q = edge_quadrature(3)
    normals = np.array([[1, 1], [-1, 0], [0, -1]]) / np.array([[np.sqrt(2)], [1], [1]])
    lengths = np.array([np.sqrt(2), 1.0, 1.0])
    for k in range(3):
        vals = eval_basis("RT0", edge_points(k, q.points)).values  # (nq, 3, 2)
        flux = lengths[k] * np.einsum("q,qid,d->i", q.weights, vals, normals[k])
        expect = np.zeros(3)
        expect[k] = 1.0
        assert np.allclose(flux, expect, atol=1e-15)


def test_rt0_function_traces_and_divergence(rng):
    m = build_rect_mesh(Rect(0, 1, 0, 2), 3, 4)
    s = extract_skeleton(m)
    coef = rng.normal(size=m.n_edges)
    fn = RT0Function(s, coef)
    q = edge_quadrature(3)
    for k in range(3):
        vals = fn.evaluate(edge_points(k, q.points))  # (nT, nq, 2)
        e = m.triangle_edges[:, k]
        nk = s.normals[e]
        trace = np.einsum("tqd,td->tq", vals, nk)
        assert np.allclose(trace, coef[e][:, None], atol=1e-12)
    # divergence by quadrature of the divergence theorem vs the closed formula
    expect = (coef[m.triangle_edges] * s.signs * s.lengths[m.triangle_edges]).sum(1) / m.areas()
    assert np.allclose(fn.divergence(), expect)


def _meshes(n=1):
    r1, r2 = Rect(0, 1, 0, 1), Rect(1, 2, 0, 1)
    m1, m2 = build_rect_mesh(r1, n, n), build_rect_mesh(r2, n, n)
    s = extract_skeleton(m1)
    return m1, m2, s, classify_boundary(m1, m2, r1, r2)


def test_dof_counts_n1_weak():
    m1, m2, s, tags = _meshes(1)
    dm = build_dof_map(m1, s, tags, m2, "weak")
    # enumeration: with one cell per side every vertex touches the outer boundary
    free_uhat = int(np.sum(tags.vertex_tags1 != Tag.GAMMA1))
    free_u2 = int(np.sum(tags.vertex_tags2 != Tag.GAMMA2))
    assert dm.counts == {"u1": 2, "sigma": 4, "uhat": free_uhat, "sighat": 5, "u2": free_u2}
    assert free_uhat == 0 and free_u2 == 0
    assert dm.N == 11


def test_dof_counts_weak_strong():
    m1, m2, s, tags = _meshes(4)
    weak = build_dof_map(m1, s, tags, m2, "weak")
    strong = build_dof_map(m1, s, tags, m2, "strong")
    inner_gamma = int(np.sum(tags.vertex_tags1 == Tag.GAMMA))
    assert inner_gamma == 3
    assert weak.N - strong.N == inner_gamma
    # identification in strong mode, distinct indices in weak mode
    v1, v2 = tags.gamma_vertices.T
    inner = tags.vertex_tags1[v1] == Tag.GAMMA
    assert np.array_equal(strong.uhat_index[v1[inner]], strong.u2_index[v2[inner]])
    assert not np.any(np.isin(weak.u2_index[v2[inner]], weak.uhat_index))


@pytest.mark.parametrize("mode", ["weak", "strong"])
def test_dof_bijection(mode):
    m1, m2, s, tags = _meshes(3)
    dm = build_dof_map(m1, s, tags, m2, mode)
    used = np.concatenate([
        dm.u1_index, dm.sigma_index.ravel(), dm.uhat_index, dm.sighat_index, dm.u2_index
    ])
    free = np.unique(used[used < dm.N])
    assert np.array_equal(free, np.arange(dm.N))
    assert np.array_equal(np.unique(used[used >= dm.N]), np.arange(dm.N, dm.n_total))
    assert dm.N == sum(dm.counts.values())


def test_homogeneous_lifting_is_zero():
    m1, m2, s, tags = _meshes(2)
    assert not np.any(build_dof_map(m1, s, tags, m2).dirichlet_values)


def test_lifting_values():
    m1, m2, s, tags = _meshes(2)
    dm = build_dof_map(m1, s, tags, m2, dirichlet=lambda x, y: x + 10 * y)
    ext = dm.extend(np.zeros(dm.N))
    d1 = np.flatnonzero(tags.vertex_tags1 == Tag.GAMMA1)
    x, y = m1.vertices[d1].T
    assert np.allclose(ext[dm.uhat_index[d1]], x + 10 * y)


def test_bad_mode():
    m1, m2, s, tags = _meshes(1)
    with pytest.raises(ValueError):
        build_dof_map(m1, s, tags, m2, "medium")
