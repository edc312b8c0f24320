"""Maximum Likelihood and leave-one-out Cross Validation estimation of
(sigma2, ell) with the smoothness and nugget held fixed."""

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize as _nelder_mead

from .covkernel import MaternSpec, ParamBox, correlation_matrix
from .gplinalg import (
    NotPositiveDefinite,
    build_cov,
    cholesky,
    cov_from_correlation,
    inverse,
    logdet,
    solve,
)
from .sampling import Design

__all__ = [
    "Dataset",
    "FitResult",
    "OptimizerConfig",
    "ObjectiveFailure",
    "CriterionObjective",
    "ml_criterion",
    "cv_criterion",
    "loo_predictions",
    "minimize",
    "fit",
]


class ObjectiveFailure(RuntimeError):
    """The objective could not be evaluated anywhere on the start grid."""


@dataclass(frozen=True, eq=False)
class Dataset:
    design: Design
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        if y.shape[0] != self.design.n:
            raise ValueError(f"y has length {y.shape[0]} but the design has {self.design.n} points")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.design.n


@dataclass
class FitResult:
    sigma2: float
    ell: float
    criterion_value: float
    evaluations: int
    converged: bool

    @property
    def theta_hat(self):
        return (self.sigma2, self.ell)


@dataclass(frozen=True)
class OptimizerConfig:
    """Multistart grid + Nelder-Mead settings.

    ``grid`` nodes per axis (geometric in sigma2, uniform in ell); Nelder-Mead
    is restarted from the ``n_starts`` best grid nodes and stops when the
    simplex diameter, measured in box-normalised coordinates, drops below
    ``xtol`` or after ``max_evals`` evaluations.
    """

    grid: int = 12
    xtol: float = 1e-4
    max_evals: int = 400
    n_starts: int = 1

    def to_dict(self):
        return {"grid": self.grid, "xtol": self.xtol, "max_evals": self.max_evals, "n_starts": self.n_starts}


def _ml_value(L, y):
    n = y.shape[0]
    alpha = solve(L, y)
    return (logdet(L) + float(y @ alpha)) / n


def _loo_residuals(L, y):
    Rinv = inverse(L)
    alpha = Rinv @ y
    return alpha / np.diag(Rinv)


def _normalised_factor(corr, sigma2, delta):
    # LOO residuals only see R up to scale: factor corr + (delta/sigma2) I
    return cholesky(cov_from_correlation(corr, 1.0, delta / sigma2))


def _cv_factor(theta, design):
    corr = correlation_matrix(design.points, theta.ell, theta.nu)
    return _normalised_factor(corr, theta.sigma2, theta.delta)


def ml_criterion(theta, data):
    """Modified opposite log-likelihood ``(log det R + y^T R^-1 y) / n``."""
    return _ml_value(cholesky(build_cov(theta, data.design)), data.y)


def loo_predictions(theta, data):
    """Leave-one-out kriging predictions from a single inverse.

    Uses ``y_i - yhat_i = (R^-1 y)_i / (R^-1)_ii``.
    """
    if data.n < 2:
        raise ValueError("leave-one-out needs at least 2 observations")
    return data.y - _loo_residuals(_cv_factor(theta, data.design), data.y)


def cv_criterion(theta, data):
    """Mean squared leave-one-out error,
    ``y^T R^-1 diag(R^-1)^-2 R^-1 y / n``."""
    if data.n < 2:
        raise ValueError("cross validation needs at least 2 observations")
    res = _loo_residuals(_cv_factor(theta, data.design), data.y)
    return float(np.mean(res**2))


class CriterionObjective:
    """``(sigma2, ell) -> criterion`` on a fixed dataset.

    The unit-variance correlation matrix depends on ``ell`` only, so it is
    cached and rescaled for every ``sigma2`` tried at the same ``ell``.
    """

    def __init__(self, kind, data, nu, delta, cache_size=4):
        if kind not in ("ml", "cv"):
            raise ValueError(f"unknown criterion {kind!r}")
        if kind == "cv" and data.n < 2:
            raise ValueError("cross validation needs at least 2 observations")
        self.kind = kind
        self.data = data
        self.nu = float(nu)
        self.delta = float(delta)
        self._cache = OrderedDict()
        self._cache_size = cache_size
        self.evaluations = 0

    def correlation(self, ell):
        corr = self._cache.get(ell)
        if corr is None:
            corr = correlation_matrix(self.data.design.points, ell, self.nu)
            self._cache[ell] = corr
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return corr

    def spec(self, sigma2, ell):
        return MaternSpec(sigma2, ell, self.nu, self.delta)

    def __call__(self, sigma2, ell):
        self.evaluations += 1
        corr = self.correlation(float(ell))
        if self.kind == "ml":
            return _ml_value(cholesky(cov_from_correlation(corr, float(sigma2), self.delta)), self.data.y)
        L = _normalised_factor(corr, float(sigma2), self.delta)
        return float(np.mean(_loo_residuals(L, self.data.y) ** 2))


class _BoxMap:
    """Unit square <-> box, log scale for sigma2."""

    def __init__(self, box):
        self.box = box
        self.ls = (math.log(box.sigma2_range[0]), math.log(box.sigma2_range[1]))
        self.ell = box.ell_range

    def to_theta(self, u):
        u0 = min(max(float(u[0]), 0.0), 1.0)
        u1 = min(max(float(u[1]), 0.0), 1.0)
        s = math.exp(self.ls[0] + u0 * (self.ls[1] - self.ls[0]))
        ell = self.ell[0] + u1 * (self.ell[1] - self.ell[0])
        return self.box.project(s, ell)

    def to_unit(self, sigma2, ell):
        ds = self.ls[1] - self.ls[0]
        de = self.ell[1] - self.ell[0]
        u0 = (math.log(sigma2) - self.ls[0]) / ds if ds > 0 else 0.0
        u1 = (ell - self.ell[0]) / de if de > 0 else 0.0
        return np.array([u0, u1])


_EVAL_ERRORS = (NotPositiveDefinite, FloatingPointError, ValueError, ZeroDivisionError)


def minimize(objective, box=None, cfg=None):
    """Minimise ``objective(sigma2, ell)`` over ``box``.

    A coarse grid is scanned first (``ell`` outer, ``sigma2`` inner); ties go
    to the first node in that order. Nelder-Mead then starts from the best
    node(s), with trial points clipped onto the box. The best point seen
    anywhere is returned, so the result is never worse than any grid node.

    Raises
    ------
    ObjectiveFailure
        If the objective raised at every grid node.
    """
    box = ParamBox() if box is None else box
    cfg = OptimizerConfig() if cfg is None else cfg
    bmap = _BoxMap(box)
    count = 0
    best = [math.inf, None]

    def f(sigma2, ell):
        nonlocal count
        count += 1
        try:
            v = float(objective(sigma2, ell))
        except _EVAL_ERRORS:
            return math.inf
        if not math.isfinite(v):
            return math.inf
        if v < best[0]:
            best[0], best[1] = v, (sigma2, ell)
        return v

    s_nodes, ell_nodes = box.grid(cfg.grid)
    scores = []
    for ell in ell_nodes:
        for s in s_nodes:
            scores.append((f(float(s), float(ell)), len(scores), float(s), float(ell)))
    if best[1] is None:
        raise ObjectiveFailure("objective failed at every grid node")

    finite = sorted(t for t in scores if math.isfinite(t[0]))
    h = 1.0 / max(cfg.grid - 1, 1)
    runs = []
    for _, _, s0, l0 in finite[: max(cfg.n_starts, 0)]:
        u0 = bmap.to_unit(s0, l0)
        simplex = [u0]
        for k in range(2):
            v = u0.copy()
            v[k] = v[k] + h if v[k] + h <= 1.0 else v[k] - h
            simplex.append(v)
        res = _nelder_mead(
            lambda u: f(*bmap.to_theta(u)),
            u0,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0), (0.0, 1.0)],
            options={
                "initial_simplex": np.array(simplex),
                # vertex-to-best distance <= xtol/2 bounds the diameter by xtol
                "xatol": cfg.xtol / 2,
                "fatol": np.inf,
                "maxfev": cfg.max_evals,
            },
        )
        sim = res.final_simplex[0]
        diam = max(np.max(np.abs(sim[i] - sim[j])) for i in range(3) for j in range(i))
        runs.append((res.fun, bool(diam < cfg.xtol)))

    value, (s_hat, l_hat) = best
    # converged refers to the descent that produced the best point
    converged = bool(runs) and min(runs, key=lambda r: r[0])[1]
    return FitResult(float(s_hat), float(l_hat), value, count, converged)


def fit(data, method, nu, delta, box=None, cfg=None):
    """Fit (sigma2, ell) by ``method`` in {"ml", "cv"}."""
    obj = CriterionObjective(method, data, nu, delta)
    return minimize(obj, box, cfg)
