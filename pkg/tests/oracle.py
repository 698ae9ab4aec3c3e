"""Brute-force reference computations, kept independent of the package code.

Bases are built from monomials in physical coordinates, volume integrals use
a Duffy-collapsed tensor Gauss-Legendre rule with many points, and edge
integrals are parametrised in physical space.
"""
import numpy as np

N_GAUSS = 14


def cross2(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def triangle_rule(p, n=N_GAUSS):
    """Physical points and weights on triangle with vertex array p (3, 2)."""
    u, wu = _gauss01(n)
    v, wv = _gauss01(n)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv) * (1.0 - U)
    s, t = U.ravel(), (V * (1.0 - U)).ravel()
    area = 0.5 * abs(cross2(p[1] - p[0], p[2] - p[0]))
    pts = p[0] + s[:, None] * (p[1] - p[0]) + t[:, None] * (p[2] - p[0])
    return pts, W.ravel() * 2.0 * area


def p2_monomial_basis(p):
    """P2 Lagrange basis on triangle p via a monomial Vandermonde matrix.

    Node order: the three vertices, then the midpoints of the edges opposite
    vertex 0, 1, 2.  Returns (value(x), grad(x)) callables.
    """
    nodes = np.vstack([p, 0.5 * (p[1] + p[2]), 0.5 * (p[2] + p[0]), 0.5 * (p[0] + p[1])])

    def mono(x):
        X, Y = x[:, 0], x[:, 1]
        return np.column_stack([np.ones_like(X), X, Y, X * X, X * Y, Y * Y])

    def mono_grad(x):
        X, Y = x[:, 0], x[:, 1]
        z, o = np.zeros_like(X), np.ones_like(X)
        gx = np.column_stack([z, o, z, 2 * X, Y, z])
        gy = np.column_stack([z, z, o, z, X, 2 * Y])
        return gx, gy

    C = np.linalg.inv(mono(nodes))  # column j -> coefficients of basis j

    def value(x):
        return mono(x) @ C

    def grad(x):
        gx, gy = mono_grad(x)
        return gx @ C, gy @ C

    return value, grad


def p1_physical(p, x):
    """Barycentric coordinates of points x in triangle p, shape (n, 3)."""
    A = np.vstack([p.T, np.ones(3)])
    rhs = np.vstack([x.T, np.ones(len(x))])
    return np.linalg.solve(A, rhs).T


def edges(p, n=N_GAUSS):
    """Per local edge k (opposite vertex k): points, weights (with length),
    outward unit normal determined against the opposite vertex."""
    t, w = _gauss01(n)
    out = []
    for k in range(3):
        a, b = p[(k + 1) % 3], p[(k + 2) % 3]
        tang = b - a
        L = np.linalg.norm(tang)
        nrm = np.array([tang[1], -tang[0]]) / L
        if np.dot(nrm, p[k] - a) > 0:
            nrm = -nrm
        pts = a + t[:, None] * tang
        out.append((pts, w * L, nrm))
    return out


def gram(p):
    pts, w = triangle_rule(p)
    val, grad = p2_monomial_basis(p)
    v = val(pts)
    gx, gy = grad(pts)
    G = np.zeros((18, 18))
    for i in range(6):
        for j in range(6):
            m = np.sum(w * v[:, i] * v[:, j])
            dxx = np.sum(w * gx[:, i] * gx[:, j])
            dyy = np.sum(w * gy[:, i] * gy[:, j])
            dxy = np.sum(w * gx[:, i] * gy[:, j])
            G[i, j] = m + dxx + dyy
            G[6 + i, 6 + j] = m + dxx
            G[12 + i, 12 + j] = m + dyy
            G[6 + i, 12 + j] = dxy
            G[12 + j, 6 + i] = dxy
    return G


def b_matrix(p, alpha_inv_T, beta, gamma, signs=(1.0, 1.0, 1.0)):
    """b(trial, test) for trial (u1, sx, sy, uhat at 3 vertices, sighat on 3 edges)."""
    pts, w = triangle_rule(p)
    val, grad = p2_monomial_basis(p)
    v = val(pts)
    gx, gy = grad(pts)
    g = [gx, gy]
    x, y = pts[:, 0], pts[:, 1]
    A = alpha_inv_T(x, y)
    bt = beta(x, y)
    gm = gamma(x, y) * np.ones_like(x)
    B = np.zeros((18, 9))
    for i in range(6):
        B[i, 0] = np.sum(w * gm * v[:, i])
        B[i, 1] = np.sum(w * gx[:, i])
        B[i, 2] = np.sum(w * gy[:, i])
        for c in range(2):
            row = 6 + 6 * c + i
            # tau = phi_i e_c ; alpha^{-T} tau = phi_i A[:, c]
            B[row, 0] = np.sum(w * (g[c][:, i] + (bt[:, 0] * A[:, 0, c] + bt[:, 1] * A[:, 1, c]) * v[:, i]))
            B[row, 1] = np.sum(w * A[:, 0, c] * v[:, i])
            B[row, 2] = np.sum(w * A[:, 1, c] * v[:, i])
    for k, (ep, ew, nrm) in enumerate(edges(p)):
        ve = val(ep)
        lam = p1_physical(p, ep)
        for i in range(6):
            B[i, 6 + k] -= signs[k] * np.sum(ew * ve[:, i])
            for c in range(2):
                for j in range(3):
                    B[6 + 6 * c + i, 3 + j] -= np.sum(ew * lam[:, j] * ve[:, i]) * nrm[c]
    return B


def load(p, f):
    pts, w = triangle_rule(p)
    v = p2_monomial_basis(p)[0](pts)
    F = np.zeros(18)
    F[:6] = (w * f(pts[:, 0], pts[:, 1])) @ v
    return F


def min_angle(p):
    ang = []
    for k in range(3):
        a, b = p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[k]
        ang.append(np.degrees(np.arccos(np.dot(a, b) / np.linalg.norm(a) / np.linalg.norm(b))))
    return min(ang)


def shape_regular_triangles(rng, count, scale, center, min_deg=25.0):
    """Random counter-clockwise triangles of diameter about ``scale`` with all
    angles at least ``min_deg`` degrees."""
    out = []
    while len(out) < count:
        p = np.asarray(center) + scale * (rng.random((3, 2)) - 0.5)
        if cross2(p[1] - p[0], p[2] - p[0]) < 0:
            p = p[[0, 2, 1]]
        if min_angle(p) >= min_deg:
            out.append(p)
    return np.array(out)
