"""Covariance-parameter estimation by Maximum Likelihood and Cross Validation
for Gaussian processes under misspecification."""

from ._accel import backend
from .bessel import bessel_k
from .covkernel import C_INF, CovParams, MaternSpec, ParamBox, matern_cov
from .criteria import (
    QuadratureSet,
    TruthSpec,
    conditional_simulate,
    ispe_given_data,
    kl_divergence,
    make_quadrature,
    predictor,
)
from .estimators import (
    Dataset,
    FitResult,
    OptimizerConfig,
    cv_criterion,
    fit,
    loo_predictions,
    minimize,
    ml_criterion,
)
from .gplinalg import NotPositiveDefinite, build_cov, cholesky, inverse, logdet, sample_joint, solve
from .montecarlo import Scenario, aggregate, run_experiment, run_replication
from .sampling import Design, SeedPlan, derive_seed, draw_design

__version__ = "0.1.0"
