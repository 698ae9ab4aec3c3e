"""Coefficients, manufactured solutions and the two experiment presets.

The model problem is ``div(-alpha grad u + beta u) + gamma u = f`` with the
flux variable ``sigma = alpha grad u - beta u``, so ``div sigma = gamma u - f``.
All closures take coordinate arrays of matching shape and broadcast.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .mesh import Rect

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _const(value):
    def fn(x, y):
        return np.full(np.broadcast(x, y).shape, value, dtype=float)
    return fn


def _scalar_matrix(scale: float):
    def fn(x, y):
        shape = np.broadcast(x, y).shape
        return scale * np.broadcast_to(np.eye(2), shape + (2, 2))
    return fn


@dataclass(frozen=True)
class CoefficientFields:
    """``alpha`` returns (..., 2, 2); ``beta`` returns (..., 2)."""

    alpha: Field
    alpha_inv_T: Field
    beta: Field
    div_beta: Field
    gamma: Field


@dataclass(frozen=True)
class ExactSolution:
    u: Field
    grad_u: Field
    sigma: Field
    div_sigma: Field
    f: Field


@dataclass(frozen=True)
class ProblemDef:
    name: str
    rect1: Rect
    rect2: Rect
    coefficients: CoefficientFields
    exact: ExactSolution
    homogeneous_dirichlet: bool

    # shortcuts used by the assembly routines
    def f(self, x, y):
        return self.exact.f(x, y)

    def dirichlet(self, x, y):
        return self.exact.u(x, y)


def scalar_diffusion(eps: float, beta: Field, div_beta: Field, gamma: Field) -> CoefficientFields:
    return CoefficientFields(_scalar_matrix(eps), _scalar_matrix(1.0 / eps), beta, div_beta, gamma)


def experiment1() -> ProblemDef:
    """u = x(2-x)y(1-y) on (0,2)x(0,1), alpha = id, beta = (xy, 1), gamma = 1 - sin(pi x)."""

    def beta(x, y):
        x, y = np.broadcast_arrays(x, y)
        return np.stack([x * y, np.ones_like(x)], axis=-1)

    def gamma(x, y):
        return 1.0 - np.sin(np.pi * x)

    coeff = scalar_diffusion(1.0, beta, lambda x, y: np.broadcast_arrays(x, y)[1] * 1.0, gamma)

    def u(x, y):
        return x * (2.0 - x) * y * (1.0 - y)

    def grad_u(x, y):
        return np.stack([(2.0 - 2.0 * x) * y * (1.0 - y), x * (2.0 - x) * (1.0 - 2.0 * y)], axis=-1)

    def lap_u(x, y):
        return -2.0 * y * (1.0 - y) - 2.0 * x * (2.0 - x)

    def sigma(x, y):
        return grad_u(x, y) - beta(x, y) * u(x, y)[..., None]

    def div_sigma(x, y):
        # div(grad u - beta u) = lap u - (div beta) u - beta . grad u
        bg = np.sum(beta(x, y) * grad_u(x, y), axis=-1)
        return lap_u(x, y) - y * u(x, y) - bg

    def f(x, y):
        bg = np.sum(beta(x, y) * grad_u(x, y), axis=-1)
        return -lap_u(x, y) + y * u(x, y) + bg + gamma(x, y) * u(x, y)

    return ProblemDef(
        "experiment1", Rect(0.0, 1.0, 0.0, 1.0), Rect(1.0, 2.0, 0.0, 1.0),
        coeff, ExactSolution(u, grad_u, sigma, div_sigma, f), True,
    )


def experiment2(eps: float = 0.05) -> ProblemDef:
    """u = arctan((1 - |(x,y)|)/eps), alpha = eps id, beta = e^x (sin y, cos y), gamma = 0."""

    def beta(x, y):
        ex = np.exp(x)
        return np.stack([ex * np.sin(y), ex * np.cos(y)], axis=-1)

    coeff = scalar_diffusion(eps, beta, _const(0.0), _const(0.0))

    def u(x, y):
        return np.arctan((1.0 - np.hypot(x, y)) / eps)

    def _radial(x, y):
        r = np.hypot(x, y)
        g = (1.0 - r) / eps
        du = -1.0 / (eps * (1.0 + g * g))
        d2u = -2.0 * g / (eps * eps * (1.0 + g * g) ** 2)
        return r, du, d2u

    def grad_u(x, y):
        r, du, _ = _radial(x, y)
        return np.stack([du * x / r, du * y / r], axis=-1)

    def lap_u(x, y):
        r, du, d2u = _radial(x, y)
        return d2u + du / r

    def sigma(x, y):
        return eps * grad_u(x, y) - beta(x, y) * u(x, y)[..., None]

    def div_sigma(x, y):
        return eps * lap_u(x, y) - np.sum(beta(x, y) * grad_u(x, y), axis=-1)

    def f(x, y):
        return -eps * lap_u(x, y) + np.sum(beta(x, y) * grad_u(x, y), axis=-1)

    return ProblemDef(
        "experiment2", Rect(0.2, 0.7, 0.2, 1.2), Rect(0.7, 1.2, 0.2, 1.2),
        coeff, ExactSolution(u, grad_u, sigma, div_sigma, f), False,
    )


def zero_data(p: ProblemDef) -> ProblemDef:
    """Same geometry and coefficients with f = 0 and homogeneous boundary data."""
    zero = _const(0.0)

    def zero_vec(x, y):
        return np.zeros(np.broadcast(x, y).shape + (2,))

    exact = ExactSolution(zero, zero_vec, zero_vec, zero, zero)
    return replace(p, name=p.name + "-zero", exact=exact, homogeneous_dirichlet=True)


def _sample_points(p: ProblemDef, nsamples: int, seed: int = 0) -> np.ndarray:
    halton = qmc.Halton(d=2, seed=seed)
    pts = []
    for k, r in enumerate((p.rect1, p.rect2)):
        m = nsamples // 2 if k == 0 else nsamples - nsamples // 2
        s = halton.random(m)
        pts.append(qmc.scale(s, [r.x0, r.y0], [r.x1, r.y1]))
    return np.vstack(pts)


def _boundary_points(p: ProblemDef, m: int) -> np.ndarray:
    r1, r2 = p.rect1, p.rect2
    x0, x1 = min(r1.x0, r2.x0), max(r1.x1, r2.x1)
    y0, y1 = min(r1.y0, r2.y0), max(r1.y1, r2.y1)
    t = np.linspace(0.0, 1.0, m)
    xs = x0 + t * (x1 - x0)
    ys = y0 + t * (y1 - y0)
    return np.vstack([
        np.column_stack([xs, np.full(m, y0)]),
        np.column_stack([xs, np.full(m, y1)]),
        np.column_stack([np.full(m, x0), ys]),
        np.column_stack([np.full(m, x1), ys]),
    ])


def validate_problem(p: ProblemDef, nsamples: int = 1000, fd_step: float = 1e-5) -> dict:
    """Check the closed forms of a problem at quasi-random interior points.

    Returns the maximal violation of each check:

    ``consistency``    |div_sigma - (gamma u - f)|
    ``sigma``          |sigma - (alpha grad_u - beta u)|
    ``alpha_inverse``  |alpha alpha_inv_T^T - I|
    ``alpha_min_eig``  minimal eigenvalue of the symmetric part of alpha
    ``fd_gradient``    relative mismatch of grad_u against central differences of u
    ``fd_div_beta``    relative mismatch of div_beta against central differences of beta
    ``boundary``       |u| on the outer boundary (only for homogeneous problems)
    """
    pts = _sample_points(p, nsamples)
    x, y = pts[:, 0], pts[:, 1]
    c, e = p.coefficients, p.exact
    u = e.u(x, y)
    report = {}
    report["consistency"] = float(np.max(np.abs(e.div_sigma(x, y) - (c.gamma(x, y) * u - e.f(x, y)))))
    A = c.alpha(x, y)
    sig = np.einsum("...ij,...j->...i", A, e.grad_u(x, y)) - c.beta(x, y) * u[..., None]
    report["sigma"] = float(np.max(np.abs(sig - e.sigma(x, y))))
    prod = A @ np.swapaxes(c.alpha_inv_T(x, y), -1, -2)
    report["alpha_inverse"] = float(np.max(np.abs(prod - np.eye(2))))
    sym = 0.5 * (A + np.swapaxes(A, -1, -2))
    report["alpha_min_eig"] = float(np.min(np.linalg.eigvalsh(sym)))

    hs = fd_step
    gx = (e.u(x + hs, y) - e.u(x - hs, y)) / (2 * hs)
    gy = (e.u(x, y + hs) - e.u(x, y - hs)) / (2 * hs)
    g = e.grad_u(x, y)
    scale = max(1.0, float(np.max(np.abs(g))))
    report["fd_gradient"] = float(np.max(np.abs(np.column_stack([gx, gy]) - g))) / scale
    bx = (c.beta(x + hs, y)[..., 0] - c.beta(x - hs, y)[..., 0]) / (2 * hs)
    by = (c.beta(x, y + hs)[..., 1] - c.beta(x, y - hs)[..., 1]) / (2 * hs)
    db = c.div_beta(x, y)
    scale = max(1.0, float(np.max(np.abs(db))))
    report["fd_div_beta"] = float(np.max(np.abs(bx + by - db))) / scale

    if p.homogeneous_dirichlet:
        b = _boundary_points(p, max(nsamples // 8, 2))
        report["boundary"] = float(np.max(np.abs(e.u(b[:, 0], b[:, 1]))))
    return report
