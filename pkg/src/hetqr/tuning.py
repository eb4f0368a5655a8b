"""Tuning-parameter selection: large-validation-set scoring and k-fold
cross-validation. Both score candidate lambdas by the summed check loss on
held-out data and break score ties toward the larger lambda (sparser model).

A ``fitter`` is any callable ``(train_dataset, grid, lam) -> CoefficientSet``
(or an object with a ``.coef`` attribute, e.g. a FitReport); the repo's
estimators are used partially applied to their extra arguments.
"""

from dataclasses import dataclass
import warnings

import numpy as np

from .model import stacked_loss

__all__ = [
    "LambdaGrid",
    "TuningResult",
    "default_lambda_grid",
    "tune_validation",
    "tune_cv",
]


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly increasing nonnegative tuning-parameter values."""

    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(np.atleast_1d(self.values), dtype=float)
        values.flags.writeable = False
        if values.ndim != 1 or len(values) < 1:
            raise ValueError("need at least one lambda")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("lambdas must be finite and nonnegative")
        if np.any(np.diff(values) <= 0):
            raise ValueError("lambdas must be strictly increasing")
        object.__setattr__(self, "values", values)

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


def default_lambda_grid(n, num=30, lo=1e-4, hi=1e1):
    """Log-spaced grid over [lo, hi] scaled by 1/n."""
    return LambdaGrid(np.geomspace(lo, hi, num) / n)


@dataclass(frozen=True)
class TuningResult:
    best_lambda: float
    scores: np.ndarray
    lambdas: np.ndarray  # surviving candidates, aligned with scores
    method: str
    best_coef: object = None

    def __post_init__(self):
        object.__setattr__(self, "scores", np.atleast_1d(np.asarray(self.scores, dtype=float)))
        object.__setattr__(self, "lambdas", np.atleast_1d(np.asarray(self.lambdas, dtype=float)))


def _coef_of(fit):
    return fit.coef if hasattr(fit, "coef") else fit


def _pick_best(lambdas, scores):
    # argmin with ties broken toward the larger lambda
    best = 0
    for i in range(1, len(lambdas)):
        if scores[i] < scores[best] or (scores[i] == scores[best] and lambdas[i] > lambdas[best]):
            best = i
    return best


def _lambda_values(lambdas):
    if isinstance(lambdas, LambdaGrid):
        return np.asarray(lambdas.values, dtype=float)
    return np.atleast_1d(np.asarray(lambdas, dtype=float))


def tune_validation(train, valid, grid, lambdas, fitter):
    """Fit on ``train`` at every lambda and score by the stacked check loss
    on ``valid``; lambdas whose fit fails are excluded with a warning."""
    if valid.n < 1:
        raise ValueError("validation set is empty")
    values = _lambda_values(lambdas)
    kept, scores, fits = [], [], []
    for lam in values:
        try:
            fit = fitter(train, grid, float(lam))
        except Exception as exc:  # noqa: BLE001 - any per-lambda failure just drops the candidate
            warnings.warn(f"fit failed at lambda={lam:g}: {exc}", stacklevel=2)
            continue
        kept.append(float(lam))
        fits.append(fit)
        scores.append(stacked_loss(valid, grid, _coef_of(fit)))
    if not kept:
        raise RuntimeError("every candidate lambda failed to fit")
    best = _pick_best(kept, scores)
    return TuningResult(
        best_lambda=kept[best],
        scores=np.array(scores),
        lambdas=np.array(kept),
        method="ValidationSet",
        best_coef=_coef_of(fits[best]),
    )


def cv_folds(n, k, seed):
    """Seeded random partition of range(n) into k near-equal folds."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n < k:
        raise ValueError("need at least one observation per fold")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def tune_cv(data, grid, lambdas, k, seed, fitter):
    """k-fold cross-validation: per lambda, sum the held-out stacked check
    loss across folds; a failure at any fold drops that lambda."""
    from .model import Dataset  # local import keeps module load order simple

    folds = cv_folds(data.n, k, seed)
    values = _lambda_values(lambdas)
    all_idx = np.arange(data.n)
    splits = []
    for held in folds:
        rest = np.setdiff1d(all_idx, held)
        splits.append(
            (
                Dataset(y=data.y[rest], Z=data.Z[rest], feature_names=data.feature_names),
                Dataset(y=data.y[held], Z=data.Z[held], feature_names=data.feature_names),
            )
        )

    kept, scores = [], []
    for lam in values:
        total = 0.0
        try:
            for tr, held in splits:
                fit = fitter(tr, grid, float(lam))
                total += stacked_loss(held, grid, _coef_of(fit))
        except Exception as exc:  # noqa: BLE001
            warnings.warn(f"cv fit failed at lambda={lam:g}: {exc}", stacklevel=2)
            continue
        kept.append(float(lam))
        scores.append(total)
    if not kept:
        raise RuntimeError("every candidate lambda failed to fit")
    best = _pick_best(kept, scores)
    return TuningResult(
        best_lambda=kept[best],
        scores=np.array(scores),
        lambdas=np.array(kept),
        method="KFoldCV",
    )
