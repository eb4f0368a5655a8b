"""Per-level baseline estimators: plain, lasso, and adaptive-lasso quantile
regression. Each level is fitted independently on the shared LP engine; the
penalty scale convention is total (not per-observation), i.e. the per-level
subproblem carries ``n * lam * sum_j |g_j|`` so lambda grids are comparable
across estimators and sample sizes.
"""

import warnings

import numpy as np

from .lp_core import SolverFailure, SolverOptions, solve_penalized_qr
from .model import CoefficientSet

__all__ = ["fit_qr", "fit_qr_lasso", "fit_qr_alasso", "PILOT_CLIP"]

# floor on |pilot| when forming adaptive weights; a zero pilot would give an
# infinite weight
PILOT_CLIP = 1e-4


def _fit_per_level(data, grid, penalties_for_level, opts):
    intercepts = np.empty(grid.m)
    slopes = np.empty((grid.m, data.p))
    for m, tau in enumerate(grid.taus):
        try:
            intercepts[m], slopes[m] = solve_penalized_qr(
                data, tau, penalties_for_level(m), opts=opts
            )
        except SolverFailure as exc:
            raise SolverFailure(f"level tau={tau}: {exc}") from exc
    return CoefficientSet(intercepts=intercepts, slopes=slopes)


def fit_qr(data, grid, opts=SolverOptions()):
    """Unpenalized quantile regression at every level of the grid.

    Performs no variable selection, so the reported model always uses all
    M * p slopes. Warns when n <= p (the unpenalized fit is degenerate there).
    """
    if data.n <= data.p:
        warnings.warn("unpenalized fit with p >= n is degenerate", stacklevel=2)
    zero = np.zeros(data.p)
    return _fit_per_level(data, grid, lambda m: zero, opts)


def fit_qr_lasso(data, grid, lam, opts=SolverOptions()):
    """L1-penalized quantile regression applied to each level separately."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    pen = np.full(data.p, data.n * lam)
    return _fit_per_level(data, grid, lambda m: pen, opts)


def fit_qr_alasso(data, grid, lam, pilot=None, opts=SolverOptions()):
    """Adaptive-lasso quantile regression per level.

    Slope j at level m carries penalty ``n * lam / max(|pilot_mj|, PILOT_CLIP)``.
    Without an explicit pilot, the unpenalized fit is used when n > p and the
    lasso fit at the same lam when p >= n.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if pilot is None:
        pilot = fit_qr(data, grid, opts) if data.n > data.p else fit_qr_lasso(data, grid, lam, opts)
    if pilot.slopes.shape != (grid.m, data.p):
        raise ValueError("pilot dimensions do not match data and grid")
    adapt = data.n * lam / np.maximum(np.abs(pilot.slopes), PILOT_CLIP)
    return _fit_per_level(data, grid, lambda m: adapt[m], opts)
