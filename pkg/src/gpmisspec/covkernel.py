"""Matérn covariance family with nugget.

The kernel is parameterised as

    K(t) = sigma2 / (Gamma(nu) 2^(nu-1)) * x^nu * K_nu(x),   x = 2 sqrt(nu) |t| / ell

with ``|t|`` the max-norm of the displacement. The nugget ``delta`` never
enters ``K``; it is added on the diagonal of covariance matrices only.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import USE_NUMBA, njit
from .bessel import _bessel_k_scalar, bessel_k_array

__all__ = [
    "C_INF",
    "MaternSpec",
    "CovParams",
    "ParamBox",
    "matern_cov",
    "matern_correlation",
    "correlation_matrix",
    "cross_correlation",
]

#: Lower bound enforced on the nugget of model-family members.
C_INF = 0.01

# Bessel argument past which the kernel is set to exactly 0.
X_CUTOFF = 700.0


@dataclass(frozen=True)
class MaternSpec:
    """One member of the Matérn family plus its nugget variance."""

    sigma2: float
    ell: float
    nu: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2}")
        if not self.ell > 0:
            raise ValueError(f"ell must be > 0, got {self.ell}")
        if not self.nu > 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")

    def check_model(self, c_inf=C_INF):
        """Raise unless the nugget satisfies the model-family floor."""
        if self.delta < c_inf:
            raise ValueError(
                f"model nugget {self.delta} is below the lower bound {c_inf}"
            )
        return self

    def with_theta(self, sigma2, ell):
        return MaternSpec(float(sigma2), float(ell), self.nu, self.delta)

    def scaled(self, c):
        """Multiply both variance and nugget by ``c``."""
        return MaternSpec(self.sigma2 * c, self.ell, self.nu, self.delta * c)

    def to_dict(self):
        return {"sigma2": self.sigma2, "ell": self.ell, "nu": self.nu, "delta": self.delta}


CovParams = MaternSpec


@dataclass(frozen=True)
class ParamBox:
    """Closed search box for (sigma2, ell)."""

    sigma2_range: tuple = (0.01, 100.0)
    ell_range: tuple = (0.2, 10.0)

    def __post_init__(self):
        for name in ("sigma2_range", "ell_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ValueError(f"{name} must satisfy 0 < lo <= hi, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))

    def contains(self, sigma2, ell, rtol=1e-12):
        (s_lo, s_hi), (l_lo, l_hi) = self.sigma2_range, self.ell_range
        return (
            s_lo * (1 - rtol) <= sigma2 <= s_hi * (1 + rtol)
            and l_lo * (1 - rtol) <= ell <= l_hi * (1 + rtol)
        )

    def project(self, sigma2, ell):
        return (
            min(max(sigma2, self.sigma2_range[0]), self.sigma2_range[1]),
            min(max(ell, self.ell_range[0]), self.ell_range[1]),
        )

    def grid(self, n_sigma2, n_ell=None):
        """Grid nodes: geometric in sigma2, uniform in ell."""
        n_ell = n_sigma2 if n_ell is None else n_ell
        s = np.geomspace(*self.sigma2_range, n_sigma2)
        ell = np.linspace(*self.ell_range, n_ell)
        return s, ell

    def to_dict(self):
        return {"sigma2_range": list(self.sigma2_range), "ell_range": list(self.ell_range)}


def _normaliser(nu):
    return 1.0 / (math.gamma(nu) * 2.0 ** (nu - 1.0))


@njit
def _rho_scalar(nu, x, norm):
    if x == 0.0:
        return 1.0
    if x > X_CUTOFF:
        return 0.0
    return norm * x**nu * _bessel_k_scalar(nu, x)


def _rho_array(nu, x, norm):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[x == 0.0] = 1.0
    mid = (x > 0.0) & (x <= X_CUTOFF)
    if mid.any():
        xm = x[mid]
        out[mid] = norm * xm**nu * bessel_k_array(nu, xm)
    return out


def matern_correlation(nu, x):
    """Unit-variance Matérn correlation as a function of the Bessel argument."""
    return _rho_array(float(nu), x, _normaliser(nu))


def matern_cov(spec, t):
    """Noise-free covariance ``K(t)`` for a displacement ``t`` (scalar or vector)."""
    r = float(np.max(np.abs(np.atleast_1d(np.asarray(t, dtype=float)))))
    if r == 0.0:
        return spec.sigma2
    x = 2.0 * math.sqrt(spec.nu) * r / spec.ell
    return spec.sigma2 * float(_rho_array(spec.nu, np.array([x]), _normaliser(spec.nu))[0])


@njit
def _pairwise_nb(points, scale, nu, norm):
    n, d = points.shape
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i):
            r = 0.0
            for k in range(d):
                r = max(r, abs(points[i, k] - points[j, k]))
            v = _rho_scalar(nu, scale * r, norm)
            out[i, j] = v
            out[j, i] = v
    return out


@njit
def _cross_nb(a, b, scale, nu, norm):
    m, d = a.shape
    n = b.shape[0]
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            r = 0.0
            for k in range(d):
                r = max(r, abs(a[i, k] - b[j, k]))
            out[i, j] = _rho_scalar(nu, scale * r, norm)
    return out


def _maxnorm_dist(a, b):
    return np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=2)


def _pairwise_np(points, scale, nu, norm):
    n = points.shape[0]
    iu, ju = np.tril_indices(n, -1)
    r = np.max(np.abs(points[iu] - points[ju]), axis=1)
    out = np.empty((n, n))
    v = _rho_array(nu, scale * r, norm)
    out[iu, ju] = v
    out[ju, iu] = v
    np.fill_diagonal(out, 1.0)
    return out


def _cross_np(a, b, scale, nu, norm):
    return _rho_array(nu, scale * _maxnorm_dist(a, b), norm)


def _as_points(points):
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p[:, None]
    return np.ascontiguousarray(p)


def correlation_matrix(points, ell, nu, use_numba=None):
    """Unit-variance correlation matrix between all pairs of ``points``.

    The matrix is filled one unordered pair at a time, so it is exactly
    symmetric, and its diagonal is exactly 1.
    """
    p = _as_points(points)
    scale = 2.0 * math.sqrt(nu) / ell
    use_numba = USE_NUMBA if use_numba is None else use_numba
    f = _pairwise_nb if use_numba else _pairwise_np
    return f(p, scale, float(nu), _normaliser(nu))


def cross_correlation(a, b, ell, nu, use_numba=None):
    """Correlation matrix with rows indexed by ``a`` and columns by ``b``."""
    pa, pb = _as_points(a), _as_points(b)
    scale = 2.0 * math.sqrt(nu) / ell
    use_numba = USE_NUMBA if use_numba is None else use_numba
    f = _cross_nb if use_numba else _cross_np
    return f(pa, pb, scale, float(nu), _normaliser(nu))
