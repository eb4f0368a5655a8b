"""Evaluation metrics for simulation studies.

Conventions: the model size counts nonzero slopes over all quantile levels;
FM is the F-measure ``2 * (true positives) / (estimated size + true size)``;
PEE is the L1 slope error summed over levels and covariates, divided by the
number of levels; QPE averages the squared gap between true and fitted
conditional quantiles over subjects and levels; PE is the held-out stacked
check loss per observation.
"""

import numpy as np

from ..model import stacked_loss

__all__ = ["model_size", "f_measure", "pee", "qpe", "pe"]


def model_size(pattern):
    return pattern.size


def f_measure(est, truth):
    captured = int((est.active & truth.active).sum())
    total = est.size + truth.size
    if total == 0:
        return 1.0
    return 2.0 * captured / total


def pee(est, truth_slopes):
    truth_slopes = np.asarray(truth_slopes, dtype=float)
    if est.slopes.shape != truth_slopes.shape:
        raise ValueError("estimated and true slope matrices must match in shape")
    m = truth_slopes.shape[0]
    return float(np.abs(est.slopes - truth_slopes).sum() / m)


def qpe(est, oracle, test, grid):
    fitted = est.predict(test.Z)
    true_q = np.stack([oracle.q_star(t, test.Z) for t in grid.taus])
    return float(np.mean((true_q - fitted) ** 2))


def pe(est, test, grid):
    return stacked_loss(test, grid, est) / test.n
