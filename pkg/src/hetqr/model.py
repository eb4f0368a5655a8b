"""Core domain types: data containers, quantile grids, coefficient sets,
penalty weights, and the loss/penalty functions built from them.

Conventions used throughout the package:

- ``y`` is the length-n response, ``Z`` the n x p covariate matrix.
- A model fitted at M quantile levels is stored as M intercepts plus an
  M x p slope matrix.
- The fitting objective is ``stacked_loss + group_penalty``: a per-level
  check loss summed over levels, plus a square-root group penalty on the
  slopes (intercepts are never penalized).
"""

from dataclasses import dataclass, field
import csv

import numpy as np

__all__ = [
    "Dataset",
    "QuantileGrid",
    "CoefficientSet",
    "PenaltyWeights",
    "SparsityPattern",
    "FitReport",
    "ZERO_TOL",
    "check_loss",
    "stacked_loss",
    "group_penalty",
    "load_dataset_csv",
]

# |coefficient| below this counts as zero when reporting sparsity patterns
# and model sizes; interior-point solutions are zero only to numerical
# precision.
ZERO_TOL = 1e-6


def _as_readonly(a, dtype=float):
    out = np.ascontiguousarray(np.asarray(a, dtype=dtype))
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Dataset:
    """Immutable response vector plus covariate matrix.

    Arguments
    ---------
    y : length-n response vector.
    Z : n x p covariate matrix; row i pairs with y[i].
    feature_names : optional length-p labels for the covariates.
    """

    y: np.ndarray
    Z: np.ndarray
    feature_names: tuple | None = None

    def __post_init__(self):
        y = _as_readonly(np.atleast_1d(self.y))
        Z = _as_readonly(np.atleast_2d(self.Z))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "Z", Z)
        if y.ndim != 1 or Z.ndim != 2:
            raise ValueError("y must be 1-d and Z 2-d")
        n, p = Z.shape
        if n < 1 or p < 1:
            raise ValueError("need at least one observation and one covariate")
        if len(y) != n:
            raise ValueError(f"y has length {len(y)} but Z has {n} rows")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(Z)):
            raise ValueError("non-finite entries in data")
        if self.feature_names is not None:
            names = tuple(str(s) for s in self.feature_names)
            if len(names) != p:
                raise ValueError("feature_names length must match covariate count")
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def p(self):
        return self.Z.shape[1]


@dataclass(frozen=True)
class QuantileGrid:
    """Strictly increasing quantile levels with optional per-level loss weights."""

    taus: np.ndarray
    pis: np.ndarray | None = None

    def __post_init__(self):
        taus = _as_readonly(np.atleast_1d(self.taus))
        if taus.ndim != 1 or len(taus) < 1:
            raise ValueError("need at least one quantile level")
        if not np.all((taus > 0) & (taus < 1)):
            raise ValueError("quantile levels must lie strictly in (0, 1)")
        if np.any(np.diff(taus) <= 0):
            raise ValueError("quantile levels must be strictly increasing")
        object.__setattr__(self, "taus", taus)
        pis = np.ones(len(taus)) if self.pis is None else np.atleast_1d(self.pis)
        pis = _as_readonly(pis)
        if pis.shape != taus.shape:
            raise ValueError("pis must have one weight per quantile level")
        if not np.all(np.isfinite(pis)) or np.any(pis <= 0):
            raise ValueError("loss weights must be positive and finite")
        object.__setattr__(self, "pis", pis)

    @property
    def m(self):
        return len(self.taus)


@dataclass(frozen=True)
class CoefficientSet:
    """Fitted intercepts (length M) and slopes (M x p) for one quantile grid."""

    intercepts: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        intercepts = _as_readonly(np.atleast_1d(self.intercepts))
        slopes = _as_readonly(np.atleast_2d(self.slopes))
        if intercepts.ndim != 1 or slopes.ndim != 2:
            raise ValueError("intercepts must be 1-d and slopes 2-d")
        if slopes.shape[0] != len(intercepts):
            raise ValueError("slopes must have one row per intercept")
        if not np.all(np.isfinite(intercepts)) or not np.all(np.isfinite(slopes)):
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "intercepts", intercepts)
        object.__setattr__(self, "slopes", slopes)

    @property
    def m(self):
        return len(self.intercepts)

    @property
    def p(self):
        return self.slopes.shape[1]

    def predict(self, Z):
        """M x n matrix of fitted conditional quantiles at the rows of Z."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return self.intercepts[:, None] + self.slopes @ Z.T


@dataclass(frozen=True)
class PenaltyWeights:
    """Per-coefficient penalty weights (M x p, strictly positive) and the
    scalar tuning parameter."""

    omega: np.ndarray
    lambda_n: float = 0.0

    def __post_init__(self):
        omega = _as_readonly(np.atleast_2d(self.omega))
        if omega.ndim != 2:
            raise ValueError("omega must be an M x p matrix")
        if not np.all(np.isfinite(omega)) or np.any(omega <= 0):
            raise ValueError("penalty weights must be strictly positive and finite")
        object.__setattr__(self, "omega", omega)
        lam = float(self.lambda_n)
        if not np.isfinite(lam) or lam < 0:
            raise ValueError("lambda_n must be finite and nonnegative")
        object.__setattr__(self, "lambda_n", lam)

    def with_lambda(self, lambda_n):
        """Copy of these weights at a different tuning parameter value."""
        return PenaltyWeights(self.omega, float(lambda_n))

    @classmethod
    def ones(cls, m, p, lambda_n=0.0):
        return cls(np.ones((m, p)), lambda_n)


@dataclass(frozen=True)
class SparsityPattern:
    """Boolean M x p matrix marking slope coefficients treated as nonzero."""

    active: np.ndarray

    def __post_init__(self):
        active = np.ascontiguousarray(np.atleast_2d(self.active), dtype=bool)
        active.flags.writeable = False
        if active.ndim != 2:
            raise ValueError("active must be an M x p boolean matrix")
        object.__setattr__(self, "active", active)

    @classmethod
    def from_coef(cls, coef, zero_tol=ZERO_TOL):
        return cls(np.abs(coef.slopes) >= zero_tol)

    @classmethod
    def full(cls, m, p):
        return cls(np.ones((m, p), dtype=bool))

    @property
    def size(self):
        """Number of nonzero slope coefficients across all quantile levels."""
        return int(self.active.sum())


@dataclass(frozen=True)
class FitReport:
    """Result of an alternating fit: coefficients, sparsity, and diagnostics.

    ``objective_trace`` holds the original objective after each outer
    iteration and is non-increasing by construction; ``xi`` is the final
    vector of per-group auxiliary variables.
    """

    coef: CoefficientSet
    pattern: SparsityPattern
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "objective_trace", _as_readonly(np.atleast_1d(self.objective_trace)))
        object.__setattr__(self, "xi", _as_readonly(np.atleast_1d(self.xi)))


def check_loss(u, tau):
    """Check (pinball) loss u * (tau - 1{u < 0}) for a scalar u.

    Nonnegative, zero only at u = 0.
    """
    u = float(u)
    tau = float(tau)
    if not np.isfinite(u):
        raise ValueError("u must be finite")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly in (0, 1)")
    return u * tau if u >= 0 else u * (tau - 1.0)


def _check_loss_vec(u, tau):
    # vectorized check loss; u array, tau scalar
    return u * (tau - (u < 0))


def stacked_loss(data, grid, coef):
    """Check loss summed over observations and quantile levels.

    Each level m contributes ``pis[m] * sum_i rho_{tau_m}(y_i - fit_mi)``;
    with unit loss weights this is the plain stacked quantile loss.
    """
    if coef.m != grid.m:
        raise ValueError("coefficient set and quantile grid disagree on M")
    if coef.p != data.p:
        raise ValueError("coefficient set and dataset disagree on p")
    resid = data.y[None, :] - coef.predict(data.Z)
    per_level = np.array(
        [_check_loss_vec(resid[m], grid.taus[m]).sum() for m in range(grid.m)]
    )
    return float(grid.pis @ per_level)


def group_penalty(coef, w, n):
    """Square-root group penalty ``n * lambda_n * sum_j sqrt(sum_m omega_mj |gamma_mj|)``.

    Applies to slopes only; intercepts are never penalized.
    """
    if w.omega.shape != coef.slopes.shape:
        raise ValueError("penalty weights and slopes must have matching shape")
    if w.lambda_n == 0.0:
        return 0.0
    group = np.sqrt((w.omega * np.abs(coef.slopes)).sum(axis=0))
    return float(n * w.lambda_n * group.sum())


def load_dataset_csv(path):
    """Load a Dataset from CSV: header row, first column ``y``, remaining
    columns covariates. UTF-8, period decimal separator."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2:
            raise ValueError(f"{path}: need a y column plus at least one covariate")
        if header[0] != "y":
            raise ValueError(f"{path}: first column must be named 'y', got {header[0]!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    return Dataset(y=arr[:, 0], Z=arr[:, 1:], feature_names=tuple(header[1:]))
