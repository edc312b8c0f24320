"""Quality criteria for a fitted covariance: normalised Kullback-Leibler
divergence at the design and integrated square prediction error."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .covkernel import MaternSpec, correlation_matrix, cross_correlation
from .gplinalg import (
    build_cov,
    cholesky,
    cov_from_correlation,
    inverse,
    logdet,
    psd_factor,
    solve,
)

__all__ = [
    "TruthSpec",
    "QuadratureSet",
    "make_quadrature",
    "TruthConditional",
    "predictor",
    "predict",
    "kl_divergence",
    "ispe_given_data",
    "conditional_simulate",
    "criterion_landscape",
]


@dataclass(frozen=True)
class TruthSpec:
    """Generating covariance and noise variance; ``delta = 0`` is allowed."""

    matern0: MaternSpec

    @property
    def sigma2(self):
        return self.matern0.sigma2

    @property
    def delta(self):
        return self.matern0.delta


@dataclass(frozen=True, eq=False)
class QuadratureSet:
    nodes: np.ndarray
    origin: str = "iid-uniform"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if nodes.shape[0] < 1:
            raise ValueError("a quadrature set needs at least one node")
        if self.origin not in ("iid-uniform", "regular-grid"):
            raise ValueError(f"unknown quadrature origin {self.origin!r}")
        object.__setattr__(self, "nodes", nodes)

    @property
    def m(self):
        return self.nodes.shape[0]


def make_quadrature(n, d, m, origin="iid-uniform", rng=None):
    """Nodes on ``[0, n^(1/d)]^d``.

    ``iid-uniform`` draws ``m`` uniform points; ``regular-grid`` uses cell
    midpoints of a grid with ``round(m^(1/d))`` cells per axis.
    """
    side = n ** (1.0 / d)
    if origin == "iid-uniform":
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        nodes = rng.uniform(0.0, side, size=(m, d))
    elif origin == "regular-grid":
        k = max(int(round(m ** (1.0 / d))), 1)
        axis = (np.arange(k) + 0.5) * side / k
        nodes = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    else:
        raise ValueError(f"unknown quadrature origin {origin!r}")
    return QuadratureSet(nodes, origin)


def predict(theta, data, nodes):
    """Kriging means ``r_theta(t)^T R_theta^-1 y`` at several points."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim == 1:
        nodes = nodes[:, None]
    L = cholesky(build_cov(theta, data.design))
    alpha = solve(L, data.y)
    r = theta.sigma2 * cross_correlation(nodes, data.design.points, theta.ell, theta.nu)
    return r @ alpha


def predictor(theta, data, t):
    """Kriging mean at a single point ``t``; no nugget enters ``r_theta(t)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return float(predict(theta, data, t[None, :])[0])


def _kl_from_factors(L_theta, L0, R0, n):
    # Tr(R0 R_theta^-1) as the entrywise product sum
    tr = float(np.sum(R0 * inverse(L_theta)))
    return (logdet(L_theta) - logdet(L0) + tr) / n - 1.0


def kl_divergence(theta, truth, design):
    """Normalised KL divergence ``(2/n) KL(N(0, R0) || N(0, R_theta))``."""
    R0 = build_cov(truth.matern0, design)
    L0 = cholesky(R0)
    return _kl_from_factors(cholesky(build_cov(theta, design)), L0, R0, design.n)


class TruthConditional:
    """Law of the true field at quadrature nodes given the observations.

    Holds ``m0(t) = r0(t)^T R0^-1 y`` and ``v0(t) = K0(0) - r0(t)^T R0^-1 r0(t)``.
    """

    def __init__(self, truth, data, quad):
        t0 = truth.matern0
        self.truth = truth
        self.data = data
        self.quad = quad
        self.R0 = build_cov(t0, data.design)
        self.L0 = cholesky(self.R0)
        r0 = t0.sigma2 * cross_correlation(quad.nodes, data.design.points, t0.ell, t0.nu)
        self.W = sla.solve_triangular(self.L0.lower, r0.T, lower=True, check_finite=False)
        self.mean = r0 @ solve(self.L0, data.y)
        self.var = np.clip(t0.sigma2 - np.sum(self.W**2, axis=0), 0.0, None)

    def ispe(self, pred):
        return float(np.mean((pred - self.mean) ** 2) + np.mean(self.var))

    def covariance(self):
        t0 = self.truth.matern0
        K = t0.sigma2 * correlation_matrix(self.quad.nodes, t0.ell, t0.nu)
        return K - self.W.T @ self.W


def ispe_given_data(theta, truth, data, quad):
    """Integrated square prediction error, conditional on the design and y.

    ``mean_k[(yhat_theta(t_k) - m0(t_k))^2 + v0(t_k)]`` over the nodes.
    """
    cond = TruthConditional(truth, data, quad)
    return cond.ispe(predict(theta, data, quad.nodes))


def conditional_simulate(truth, data, quad, z, cond=None):
    """Draws of the true field at the nodes given y.

    ``z`` holds standard normals of shape (m,) or (m, k) for k draws.
    """
    cond = TruthConditional(truth, data, quad) if cond is None else cond
    F = psd_factor(cond.covariance())
    z = np.asarray(z, dtype=float)
    if z.shape[0] != quad.m:
        raise ValueError(f"expected {quad.m} normals per draw, got {z.shape[0]}")
    draws = F @ z
    return draws + (cond.mean if z.ndim == 1 else cond.mean[:, None])


def criterion_landscape(truth, data, quad, nu, delta, sigma2_grid, ell_grid, cond=None):
    """KL divergence and ISPE of the model (nu, delta) on a (sigma2, ell) grid.

    Returns two arrays of shape ``(len(sigma2_grid), len(ell_grid))``.
    Correlation matrices are built once per ``ell``.
    """
    cond = TruthConditional(truth, data, quad) if cond is None else cond
    n = data.n
    D = np.empty((len(sigma2_grid), len(ell_grid)))
    E = np.empty_like(D)
    for j, ell in enumerate(ell_grid):
        corr = correlation_matrix(data.design.points, ell, nu)
        cross = cross_correlation(quad.nodes, data.design.points, ell, nu)
        for i, s in enumerate(sigma2_grid):
            L = cholesky(cov_from_correlation(corr, s, delta))
            D[i, j] = _kl_from_factors(L, cond.L0, cond.R0, n)
            E[i, j] = cond.ispe(s * (cross @ solve(L, data.y)))
    return D, E
