"""Weighted check-loss linear programming engine.

Solves ``min_beta sum_i w_i * rho_{t_i}(y_i - x_i' beta)`` where every row
carries its own quantile level ``t_i`` and positive weight ``w_i``. Rows may
be real observations or penalty pseudo-rows; an L1 penalty ``lam * |beta_j|``
is encoded as the pseudo-row (y=0, x=2*lam*e_j, t=0.5, w=1) since
``rho_0.5(2*lam*b) = lam*|b|``. One solver therefore covers plain, lasso,
adaptive-lasso, and group-alternating quantile estimators.

Algorithm: Mehrotra predictor-corrector interior-point method on the bounded
dual ``max h'd : G d = b, 0 <= d <= 1`` with ``h = W y`` and ``G = X' W``.
The multiplier of the equality constraints converges to the regression
coefficients. Each iteration solves one q x q normal-equation system, so the
cost is predictable at large p. Iterates stay primal/dual feasible; the
complementarity gap equals the LP duality gap and drives termination.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
from scipy.linalg.blas import dsyrk

__all__ = [
    "PinballProblem",
    "SolverOptions",
    "SolverStatus",
    "LpSolution",
    "SolverFailure",
    "solve_pinball",
    "solve_penalized_qr",
    "pinball_objective",
]


class SolverStatus(Enum):
    OPTIMAL = "Optimal"
    ITERATION_LIMIT = "IterationLimit"
    INFEASIBLE = "Infeasible"


class SolverFailure(RuntimeError):
    """Raised when the interior-point method cannot produce a usable iterate."""


@dataclass(frozen=True)
class PinballProblem:
    """Generic weighted check-loss problem over an r x q design.

    Arguments
    ---------
    X : r x q design matrix (real observations and/or penalty pseudo-rows).
    y : length-r responses.
    t : length-r per-row quantile levels, each strictly inside (0, 1).
    w : length-r positive row weights; defaults to all ones.
    """

    X: np.ndarray
    y: np.ndarray
    t: np.ndarray
    w: np.ndarray | None = None

    def __post_init__(self):
        X = np.ascontiguousarray(np.atleast_2d(self.X), dtype=float)
        y = np.ascontiguousarray(np.atleast_1d(self.y), dtype=float)
        t = np.ascontiguousarray(np.atleast_1d(self.t), dtype=float)
        w = np.ones(len(y)) if self.w is None else np.ascontiguousarray(np.atleast_1d(self.w), dtype=float)
        r, q = X.shape
        if r < 1 or q < 1:
            raise ValueError("need at least one row and one column")
        if y.shape != (r,) or t.shape != (r,) or w.shape != (r,):
            raise ValueError("y, t, w must all have one entry per design row")
        for name, a in (("X", X), ("y", y), ("t", t), ("w", w)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"non-finite entries in {name}")
        if not np.all((t > 0) & (t < 1)):
            raise ValueError("row quantile levels must lie strictly in (0, 1)")
        if np.any(w <= 0):
            raise ValueError("row weights must be strictly positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "w", w)

    @property
    def r(self):
        return self.X.shape[0]

    @property
    def q(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 200
    # terminate when duality gap < gap_tol * (1 + |objective|)
    gap_tol: float = 1e-8
    # fraction of the distance to the boundary taken each step
    step_frac: float = 0.9995


@dataclass(frozen=True)
class LpSolution:
    beta: np.ndarray
    objective: float
    dual: np.ndarray | None
    status: SolverStatus
    iterations: int


def pinball_objective(prob, beta):
    """Recompute the weighted check-loss objective at beta."""
    resid = prob.y - prob.X @ np.asarray(beta, dtype=float)
    return float(np.sum(prob.w * resid * (prob.t - (resid < 0))))


class _NormalEquations:
    """Factorized G Q G' built once per interior-point iteration.

    Only the lower triangle is formed (symmetric rank-k update). Cholesky
    with escalating jitter; least squares as last resort for rank-deficient
    designs (duplicate/constant columns).
    """

    def __init__(self, Gt, Q):
        B = Gt * np.sqrt(Q)[:, None]
        M = dsyrk(1.0, B, trans=1, lower=1)
        self._M = M
        self._factor = None
        scale = max(np.trace(M) / M.shape[0], 1e-30)
        jitter = 0.0
        for _ in range(4):
            try:
                self._factor = scipy.linalg.cho_factor(
                    M + jitter * np.eye(M.shape[0]), lower=True, check_finite=False
                )
                return
            except scipy.linalg.LinAlgError:
                jitter = scale * 1e-12 if jitter == 0.0 else jitter * 1e4

    def solve(self, rhs):
        if self._factor is not None:
            return scipy.linalg.cho_solve(self._factor, rhs, check_finite=False)
        full = np.tril(self._M) + np.tril(self._M, -1).T
        return np.linalg.lstsq(full, rhs, rcond=None)[0]


def solve_pinball(prob, opts=SolverOptions()):
    """Minimize the weighted check loss of ``prob`` over the coefficients.

    Returns an LpSolution whose ``objective`` is the loss recomputed at the
    returned coefficients and whose ``dual`` lies in [0, 1]^r. The status is
    ITERATION_LIMIT when the duality gap has not closed within
    ``opts.max_iter`` iterations; this problem class is never infeasible, so
    an INFEASIBLE status would indicate an internal bug.
    """
    X, y, t, w = prob.X, prob.y, prob.t, prob.w
    r, q = prob.r, prob.q

    Gt = X * w[:, None]              # r x q; transpose of the dual constraint matrix
    h = w * y

    d = 1.0 - t                      # strictly interior and G d = b by construction
    s = t.copy()
    beta = _NormalEquations(Gt, np.ones(r)).solve(Gt.T @ h)  # least-squares start
    resid_w = h - Gt @ beta
    eps0 = 0.1 * (1.0 + float(np.mean(np.abs(resid_w))))
    z = np.maximum(-resid_w, 0.0) + eps0
    u = np.maximum(resid_w, 0.0) + eps0   # multiplier of the d <= 1 bound

    status = SolverStatus.ITERATION_LIMIT
    it = 0
    for it in range(1, opts.max_iter + 1):
        gap = d @ z + s @ u
        obj = pinball_objective(prob, beta)
        if gap < opts.gap_tol * (1.0 + abs(obj)):
            status = SolverStatus.OPTIMAL
            break

        Q = 1.0 / (z / d + u / s)
        rr = z - u

        # affine scaling (predictor) direction
        normal = _NormalEquations(Gt, Q)
        dbeta_a = normal.solve(-(Gt.T @ (Q * rr)))
        dd_a = Q * (-(Gt @ dbeta_a) - rr)
        dz_a = -z - (z / d) * dd_a
        du_a = -u + (u / s) * dd_a

        ap = _step_length(d, dd_a, s, -dd_a, opts.step_frac)
        ad = _step_length(z, dz_a, u, du_a, opts.step_frac)
        gap_aff = (d + ap * dd_a) @ (z + ad * dz_a) + (s - ap * dd_a) @ (u + ad * du_a)
        mu = (gap_aff / gap) ** 3 * gap / (2.0 * r)

        # corrector direction with second-order complementarity terms
        rt = (mu - dd_a * dz_a) / d - (mu + dd_a * du_a) / s - rr
        dbeta = normal.solve(Gt.T @ (Q * rt))
        dd = Q * (rt - Gt @ dbeta)
        dz = (mu - dd_a * dz_a) / d - z - (z / d) * dd
        du = (mu + dd_a * du_a) / s - u + (u / s) * dd

        ap = _step_length(d, dd, s, -dd, opts.step_frac)
        ad = _step_length(z, dz, u, du, opts.step_frac)
        d = d + ap * dd
        s = s - ap * dd
        z = z + ad * dz
        u = u + ad * du
        beta = beta + ad * dbeta

        if not (np.all(np.isfinite(beta)) and np.all(d > 0) and np.all(s > 0)):
            raise SolverFailure("interior-point iterate left the feasible region")

    return LpSolution(
        beta=beta,
        objective=pinball_objective(prob, beta),
        dual=d,
        status=status,
        iterations=it,
    )


def _step_length(a, da, b, db, frac):
    # largest alpha <= 1 with a + alpha*da > 0 and b + alpha*db > 0
    alpha = 1.0
    neg = da < 0
    if np.any(neg):
        alpha = min(alpha, frac * np.min(-a[neg] / da[neg]))
    neg = db < 0
    if np.any(neg):
        alpha = min(alpha, frac * np.min(-b[neg] / db[neg]))
    return alpha


def _screen_inactive(Z, tau, penalties):
    """Safe exclusion rule for L1-penalized quantile regression.

    The loss subgradient for slope j is bounded by
    ``B_j = sum_i |Z_ij| * max(tau, 1-tau)``; any coefficient whose penalty
    exceeds that bound is zero in every minimizer and can be dropped from
    the linear program.
    """
    bound = np.abs(Z).sum(axis=0) * max(tau, 1.0 - tau)
    return penalties > bound


def solve_penalized_qr(data, tau, slope_penalties, exclude=None, opts=SolverOptions()):
    """Single-level quantile regression with per-coefficient L1 penalties.

    Minimizes ``sum_i rho_tau(y_i - g0 - Z_i' g) + sum_j lam_j |g_j|`` and
    returns ``(intercept, slopes)``. Each positive ``lam_j`` becomes one
    pseudo-row of the pinball problem; ``exclude`` marks slopes forced to
    exact zero (their columns are omitted from the solve). The intercept is
    never penalized.
    """
    Z, y = data.Z, data.y
    n, p = Z.shape
    lam = np.asarray(slope_penalties, dtype=float)
    if lam.shape != (p,):
        raise ValueError("need one slope penalty per covariate")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("slope penalties must be finite and nonnegative")

    drop = np.zeros(p, dtype=bool) if exclude is None else np.asarray(exclude, dtype=bool).copy()
    drop |= _screen_inactive(Z, tau, lam)
    keep = ~drop
    k = int(keep.sum())

    lam_k = lam[keep]
    n_pen = int((lam_k > 0).sum())
    Xfull = np.empty((n + n_pen, k + 1))
    Xfull[:n, 0] = 1.0
    Xfull[:n, 1:] = Z[:, keep]
    yfull = np.concatenate([y, np.zeros(n_pen)])
    tfull = np.concatenate([np.full(n, tau), np.full(n_pen, 0.5)])
    if n_pen:
        Xfull[n:] = 0.0
        rows = np.arange(n_pen)
        cols = 1 + np.flatnonzero(lam_k > 0)
        Xfull[n + rows, cols] = 2.0 * lam_k[lam_k > 0]

    sol = solve_pinball(PinballProblem(X=Xfull, y=yfull, t=tfull), opts)
    intercept = float(sol.beta[0])
    slopes = np.zeros(p)
    slopes[keep] = sol.beta[1:]
    return intercept, slopes
