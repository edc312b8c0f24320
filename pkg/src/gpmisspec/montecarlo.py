"""Replication engine for the ML-versus-CV Monte Carlo study.

Each replication draws a uniform design, simulates noisy observations of
the true field, fits (sigma2, ell) by ML and by CV, and scores both fits by
the KL divergence and the integrated square prediction error.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial

import numpy as np

from .covkernel import MaternSpec, ParamBox, correlation_matrix, cross_correlation
from .criteria import (
    TruthConditional,
    TruthSpec,
    _kl_from_factors,
    make_quadrature,
)
from .estimators import CriterionObjective, Dataset, OptimizerConfig, minimize
from .gplinalg import cholesky, cov_from_correlation, psd_factor, solve
from .sampling import draw_design, rng_for

__all__ = [
    "ESTIMATORS",
    "QUANTITIES",
    "Scenario",
    "ReplicationRecord",
    "ReplicationFailure",
    "ExperimentReport",
    "default_truth",
    "simulate_dataset",
    "replication_inputs",
    "run_replication",
    "run_experiment",
    "aggregate",
]

log = logging.getLogger(__name__)

ESTIMATORS = ("ml", "cv")
QUANTITIES = ("ell", "D", "E")


def default_truth():
    return TruthSpec(MaternSpec(sigma2=1.0, ell=3.0, nu=10.0, delta=0.25**2))


@dataclass(frozen=True)
class Scenario:
    truth: TruthSpec = field(default_factory=default_truth)
    model_nu: float = 10.0
    model_delta: float = 0.25**2
    box: ParamBox = field(default_factory=ParamBox)
    n: int = 100
    n_reps: int = 1000
    quad_m: int = 2000
    quad_origin: str = "iid-uniform"
    master_seed: int = 20160701
    d: int = 1
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    # True: every model sees the same data for a given (seed, rep)
    shared_data: bool = False

    def __post_init__(self):
        if self.n < 1 or self.n_reps < 1 or self.quad_m < 1 or self.d < 1:
            raise ValueError("n, n_reps, quad_m and d must all be >= 1")
        MaternSpec(1.0, 1.0, self.model_nu, self.model_delta).check_model()

    @property
    def specification(self):
        t = self.truth.matern0
        same = t.nu == self.model_nu and t.delta == self.model_delta
        return "well-specified" if same else "misspecified"

    @property
    def seed_scope(self):
        """Extra key for the random streams; empty when data are shared."""
        if self.shared_data:
            return ""
        return f"nu={self.model_nu!r},delta={self.model_delta!r}"


@dataclass
class ReplicationRecord:
    rep_index: int
    sigma2_ml: float
    ell_ml: float
    sigma2_cv: float
    ell_cv: float
    ml_value: float
    cv_value: float
    d_ml: float
    d_cv: float
    e_ml: float
    e_cv: float
    evals_ml: int
    evals_cv: int
    converged_ml: bool
    converged_cv: bool
    seconds: float = 0.0

    def value(self, quantity, estimator):
        name = {"ell": "ell", "D": "d", "E": "e", "sigma2": "sigma2"}[quantity]
        return getattr(self, f"{name}_{estimator}")

    def check(self):
        vals = [v for k, v in asdict(self).items() if isinstance(v, float)]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("non-finite value in replication record")
        if min(self.d_ml, self.d_cv) < -1e-10 or min(self.e_ml, self.e_cv) < 0:
            raise ValueError("criterion out of range")
        return self


RECORD_FIELDS = tuple(f.name for f in fields(ReplicationRecord))


class ReplicationFailure(RuntimeError):
    def __init__(self, rep_index, cause):
        super().__init__(f"replication {rep_index} failed: {cause!r}")
        self.rep_index = rep_index
        self.cause = repr(cause)


def simulate_dataset(scenario, rep_index):
    """Design and observations for one replication.

    ``y = F0 z1 + sqrt(delta0) z2`` with ``F0 F0^T`` the noise-free truth
    covariance; field and noise use separate random streams.
    """
    seed, scope = scenario.master_seed, scenario.seed_scope
    design = draw_design(scenario.n, scenario.d, rng_for(seed, rep_index, "design", scope))
    design.check_distinct()
    t0 = scenario.truth.matern0
    K0 = t0.sigma2 * correlation_matrix(design.points, t0.ell, t0.nu)
    z1 = rng_for(seed, rep_index, "field", scope).standard_normal(scenario.n)
    z2 = rng_for(seed, rep_index, "noise", scope).standard_normal(scenario.n)
    y = psd_factor(K0) @ z1 + math.sqrt(t0.delta) * z2
    return Dataset(design, y)


def replication_inputs(scenario, rep_index):
    """(dataset, quadrature set) shared by both estimators of a replication."""
    data = simulate_dataset(scenario, rep_index)
    quad = make_quadrature(
        scenario.n,
        scenario.d,
        scenario.quad_m,
        scenario.quad_origin,
        rng_for(scenario.master_seed, rep_index, "quadrature", scenario.seed_scope),
    )
    return data, quad


def _score(cond, data, quad, nu, delta, sigma2, ell):
    corr = correlation_matrix(data.design.points, ell, nu)
    L = cholesky(cov_from_correlation(corr, sigma2, delta))
    d = _kl_from_factors(L, cond.L0, cond.R0, data.n)
    cross = cross_correlation(quad.nodes, data.design.points, ell, nu)
    e = cond.ispe(sigma2 * (cross @ solve(L, data.y)))
    return d, e


def run_replication(scenario, rep_index):
    """One data generation, two fits, four criterion values.

    Raises
    ------
    ReplicationFailure
        Wrapping whatever went wrong inside the replication.
    """
    t_start = time.perf_counter()
    try:
        data, quad = replication_inputs(scenario, rep_index)
        cond = TruthConditional(scenario.truth, data, quad)
        out = {}
        for est in ESTIMATORS:
            obj = CriterionObjective(est, data, scenario.model_nu, scenario.model_delta)
            res = minimize(obj, scenario.box, scenario.optimizer)
            d, e = _score(cond, data, quad, scenario.model_nu, scenario.model_delta, res.sigma2, res.ell)
            out[est] = (res, d, e)
        (ml, d_ml, e_ml), (cv, d_cv, e_cv) = out["ml"], out["cv"]
        rec = ReplicationRecord(
            rep_index=rep_index,
            sigma2_ml=ml.sigma2,
            ell_ml=ml.ell,
            sigma2_cv=cv.sigma2,
            ell_cv=cv.ell,
            ml_value=ml.criterion_value,
            cv_value=cv.criterion_value,
            d_ml=d_ml,
            d_cv=d_cv,
            e_ml=e_ml,
            e_cv=e_cv,
            evals_ml=ml.evaluations,
            evals_cv=cv.evaluations,
            converged_ml=ml.converged,
            converged_cv=cv.converged,
            seconds=time.perf_counter() - t_start,
        )
        return rec.check()
    except ReplicationFailure:
        raise
    except Exception as exc:
        raise ReplicationFailure(rep_index, exc) from exc


def _run_safe(scenario, rep_index):
    try:
        return run_replication(scenario, rep_index)
    except ReplicationFailure as exc:
        return exc


@dataclass
class ExperimentReport:
    scenario: Scenario
    records: list
    failures: list
    aggregates: dict
    histograms: dict

    @property
    def n_success(self):
        return len(self.records)


def _histogram(values, bins):
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return edges, counts


def aggregate(records, bins=30):
    """Table-style means and standard deviations plus histograms.

    Records are sorted by ``rep_index`` first, so the result does not depend
    on execution order. Standard deviations use the n-1 denominator; with a
    single record they are reported as 0 and ``sd_defined`` is False.

    Returns
    -------
    aggregates : dict
        ``{estimator: {"count", "mean_ell", "sd_ell", "mean_sigma2",
        "mean_E", "mean_D", "sd_defined"}}``
    histograms : dict
        ``{(quantity, estimator): (edges, counts)}``
    """
    records = sorted(records, key=lambda r: r.rep_index)
    if not records:
        raise ValueError("no successful replication to aggregate")
    k = len(records)
    aggs, hists = {}, {}
    for est in ESTIMATORS:
        col = {q: np.array([r.value(q, est) for r in records]) for q in ("ell", "D", "E", "sigma2")}
        aggs[est] = {
            "count": k,
            "mean_ell": float(np.mean(col["ell"])),
            "sd_ell": float(np.std(col["ell"], ddof=1)) if k > 1 else 0.0,
            "mean_sigma2": float(np.mean(col["sigma2"])),
            "mean_E": float(np.mean(col["E"])),
            "mean_D": float(np.mean(col["D"])),
            "sd_defined": k > 1,
        }
        for q in QUANTITIES:
            hists[(q, est)] = _histogram(col[q], bins)
    return aggs, hists


def run_experiment(scenario, workers=1, bins=30, rep_indices=None):
    """Run all replications of ``scenario`` and aggregate them.

    Failed replications are logged and excluded; an error is raised only if
    every replication fails.
    """
    reps = list(range(scenario.n_reps)) if rep_indices is None else list(rep_indices)
    job = partial(_run_safe, scenario)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, reps))
    else:
        results = [job(r) for r in reps]
    records = sorted((r for r in results if isinstance(r, ReplicationRecord)), key=lambda r: r.rep_index)
    failures = sorted(
        ((r.rep_index, r.cause) for r in results if isinstance(r, ReplicationFailure)),
        key=lambda t: t[0],
    )
    if failures:
        log.warning("%d of %d replications failed and were excluded", len(failures), len(reps))
    if not records:
        raise RuntimeError(f"all {len(reps)} replications failed; first: {failures[0][1]}")
    aggs, hists = aggregate(records, bins)
    return ExperimentReport(scenario, records, failures, aggs, hists)
