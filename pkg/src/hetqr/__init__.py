"""Joint variable selection and estimation across multiple quantile levels.

The estimator couples the M coefficients of each covariate across quantile
levels through a square-root group penalty with adaptive weights, and solves
the resulting nonconvex program by alternating a closed-form auxiliary
update with per-level weighted-L1 quantile regressions. Per-level baselines
(plain, lasso, adaptive-lasso quantile regression), tuning-parameter
selection, synthetic-data generators, and a Monte-Carlo study harness are
included.
"""

from .model import (
    Dataset,
    QuantileGrid,
    CoefficientSet,
    PenaltyWeights,
    SparsityPattern,
    FitReport,
    ZERO_TOL,
    check_loss,
    stacked_loss,
    group_penalty,
    load_dataset_csv,
)
from .lp_core import (
    PinballProblem,
    SolverOptions,
    SolverStatus,
    LpSolution,
    SolverFailure,
    solve_pinball,
    solve_penalized_qr,
)
from .qr_fit import fit_qr, fit_qr_lasso, fit_qr_alasso
from .het import (
    HetQrConfig,
    make_weights,
    make_weights_highdim,
    xi_update,
    fit_hetqr,
    objective,
)
from .tuning import LambdaGrid, TuningResult, default_lambda_grid, tune_validation, tune_cv

__version__ = "0.1.0"
