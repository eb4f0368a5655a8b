"""Shared test helpers: independent brute-force oracles for the LP engine.

The oracle enumerates every fit that interpolates q of the r rows (all basic
solutions of the check-loss LP), polishes each candidate by exact
coordinate descent, and returns the best objective found. It never calls the
interior-point solver, so it stays an independent check of it.
"""

import itertools

import numpy as np

from hetqr.lp_core import pinball_objective


def exact_line_min(prob, beta, j):
    """Exact minimizer of the pinball objective over coordinate j alone.

    The 1-d objective is piecewise linear with breakpoints where a residual
    crosses zero; the minimizer is the breakpoint where the accumulated
    slope changes sign (a weighted quantile of the breakpoints).
    """
    X, y, t, w = prob.X, prob.y, prob.t, prob.w
    a = X[:, j]
    nz = a != 0
    if not nz.any():
        return beta[j]
    r0 = y - X @ beta + a * beta[j]
    bp = r0[nz] / a[nz]
    wt = (w * np.abs(a))[nz]
    tt = np.where(a[nz] > 0, t[nz], 1.0 - t[nz])
    order = np.argsort(bp)
    bp, wt, tt = bp[order], wt[order], tt[order]
    total = np.sum(wt * tt)
    cum = np.cumsum(wt)
    k = int(np.argmax(cum >= total)) if cum[-1] >= total else len(bp) - 1
    return bp[k]


def coordinate_refine(prob, beta, rounds=60):
    beta = np.array(beta, dtype=float)
    for _ in range(rounds):
        prev = beta.copy()
        for j in range(prob.q):
            beta[j] = exact_line_min(prob, beta, j)
        if np.allclose(prev, beta, atol=1e-14, rtol=0):
            break
    return beta


def brute_force_pinball(prob):
    """Best objective over all interpolating fits plus refinement."""
    X, y = prob.X, prob.y
    r, q = X.shape
    candidates = [np.zeros(q)]
    for idx in itertools.combinations(range(r), q):
        A = X[list(idx)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        candidates.append(np.linalg.solve(A, y[list(idx)]))
    best_beta, best_obj = None, np.inf
    for cand in candidates:
        beta = coordinate_refine(prob, cand)
        obj = pinball_objective(prob, beta)
        if obj < best_obj:
            best_obj, best_beta = obj, beta
    return best_beta, best_obj


def random_pinball_problem(rng, max_r=8, max_q=2):
    from hetqr.lp_core import PinballProblem

    r = int(rng.integers(1, max_r + 1))
    q = int(rng.integers(1, min(r, max_q) + 1))
    X = rng.standard_normal((r, q))
    if rng.random() < 0.5:
        X[:, 0] = 1.0
    y = rng.standard_normal(r) * rng.uniform(0.5, 3.0)
    t = rng.uniform(0.05, 0.95, r)
    w = rng.uniform(0.2, 3.0, r)
    return PinballProblem(X=X, y=y, t=t, w=w)
