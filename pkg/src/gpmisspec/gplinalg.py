"""Dense SPD linear algebra for covariance matrices.

Factorisation, solves and the inverse go through LAPACK (scipy). No jitter
is ever added: the model nugget is the only diagonal regularisation.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .covkernel import correlation_matrix

__all__ = [
    "NotPositiveDefinite",
    "CholFactor",
    "build_cov",
    "cov_from_correlation",
    "cholesky",
    "logdet",
    "solve",
    "inverse",
    "sample_joint",
    "psd_factor",
]


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Cholesky hit a non-positive pivot."""


@dataclass(frozen=True, eq=False)
class CholFactor:
    """Lower-triangular ``L`` with ``R = L L^T``."""

    lower: np.ndarray

    @property
    def n(self):
        return self.lower.shape[0]


def cov_from_correlation(corr, sigma2, delta):
    """``sigma2 * corr + delta * I``; keeps exact symmetry of ``corr``."""
    R = sigma2 * corr
    R[np.diag_indices_from(R)] += delta
    return R


def build_cov(spec, design):
    """Covariance matrix ``K(X_i - X_j) + delta 1{i=j}`` on a design."""
    points = design.points if hasattr(design, "points") else design
    corr = correlation_matrix(points, spec.ell, spec.nu)
    return cov_from_correlation(corr, spec.sigma2, spec.delta)


def cholesky(R):
    R = np.asarray(R, dtype=float)
    try:
        L = sla.cholesky(R, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if not np.all(np.isfinite(L)):
        raise NotPositiveDefinite("non-finite entries in Cholesky factor")
    return CholFactor(L)


def logdet(L):
    return 2.0 * float(np.sum(np.log(np.diag(L.lower))))


def solve(L, b):
    """``R^{-1} b`` by forward and back substitution."""
    return sla.cho_solve((L.lower, True), b, check_finite=False)


def inverse(L):
    """Explicit symmetric ``R^{-1}`` from the factor."""
    inv, info = lapack.dpotri(L.lower, lower=1)
    if info != 0:
        raise NotPositiveDefinite(f"dpotri failed with info={info}")
    lower = np.tril(inv)
    return lower + np.tril(lower, -1).T


def sample_joint(L, z):
    """``L z``: a N(0, R) draw when ``z`` is standard normal."""
    z = np.asarray(z, dtype=float)
    if z.shape[0] != L.n:
        raise ValueError(f"expected {L.n} normals, got {z.shape[0]}")
    return L.lower @ z


def psd_factor(K, rtol=1e-8):
    """Square root ``F`` with ``F F^T = K`` for a PSD matrix.

    Uses Cholesky when it succeeds. Otherwise (smooth kernels without
    nugget are numerically singular) falls back to a symmetric
    eigendecomposition with round-off negative eigenvalues clipped to 0.
    Genuinely indefinite input raises :class:`NotPositiveDefinite`.
    """
    K = np.asarray(K, dtype=float)
    try:
        return cholesky(K).lower
    except NotPositiveDefinite:
        pass
    w, V = np.linalg.eigh(K)
    floor = -rtol * max(float(np.max(np.abs(np.diag(K)))), 1e-300)
    if w[0] < floor:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} is below {floor:.3e}")
    return V * np.sqrt(np.clip(w, 0.0, None))
