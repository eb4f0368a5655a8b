"""Data-generating processes with oracle truth exposed for scoring.

Four families:

- ``HeteroScale6``: six independent Uniform(0,1) covariates; the response
  scale grows with the sixth covariate, so its slope varies across quantile
  levels while two others stay constant.
- ``HeteroScale100``: the same signal padded with 94 independent
  Uniform(0,1) noise covariates.
- ``BlockSparse``: blocks of five correlated covariates (AR(1) or compound
  symmetry, rho=0.5, folded to nonnegative); the first eight slopes follow a
  piecewise-constant function of the quantile level, so one covariate is
  active only at upper levels.
- ``HighDim600``: the block design at 120 blocks (p=600 > n=500 at the
  default sample size) with larger piecewise slopes.

All randomness flows from ``Scenario.seed`` (an int or tuple of ints fed to
numpy's seed sequence), so draws are reproducible and splittable.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from ..model import Dataset, SparsityPattern

__all__ = ["Scenario", "OracleTruth", "generate", "scenario_p", "KINDS"]

KINDS = ("HeteroScale6", "HeteroScale100", "BlockSparse", "HighDim600")
ERROR_DISTS = ("normal", "t3", "exp1")
CORR_KINDS = ("ar", "cs")

_BLOCK_SIZE = 5

# piecewise slopes of the first eight covariates; rows are the branches
# (0, 0.3], (0.3, 0.7], (0.7, 1)
_BLOCK_SLOPES = np.array(
    [
        [0.5, 0, 0, 0, 0, 0.6, 0, 0.0],
        [0.5, 0, 0, 0, 0, 0.6, 0, 0.7],
        [0.6, 0, 0, 0, 0, 0.7, 0, 0.7],
    ]
)
_HIGHDIM_SLOPES = np.array(
    [
        [0.6, 0, 0.0, 0, 0, 0.6, 0, 0.0],
        [0.6, 0, 0.8, 0, 0, 0.7, 0, 0.8],
        [0.8, 0, 0.8, 0, 0, 0.8, 0, 1.0],
    ]
)
_BRANCH_EDGES = (0.3, 0.7)


@dataclass(frozen=True)
class Scenario:
    """One simulation design instance.

    ``error_dist`` ('normal', 't3', 'exp1') and ``corr`` ('ar', 'cs') apply
    to the block designs; ``blocks`` overrides the default block count
    (20 for BlockSparse, 120 for HighDim600). HighDim600 defaults to t3
    errors, BlockSparse to normal.
    """

    kind: str
    n: int
    seed: object = 0
    error_dist: str | None = None
    corr: str = "ar"
    rho: float = 0.5
    blocks: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; choose from {KINDS}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.error_dist is not None and self.error_dist not in ERROR_DISTS:
            raise ValueError(f"error_dist must be one of {ERROR_DISTS}")
        if self.corr not in CORR_KINDS:
            raise ValueError(f"corr must be one of {CORR_KINDS}")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if self.blocks is not None and self.blocks < 2:
            raise ValueError("need at least 2 blocks (the slope pattern spans 8 covariates)")

    @property
    def effective_error_dist(self):
        if self.error_dist is not None:
            return self.error_dist
        return "t3" if self.kind == "HighDim600" else "normal"

    @property
    def effective_blocks(self):
        if self.blocks is not None:
            return self.blocks
        return 120 if self.kind == "HighDim600" else 20


def scenario_p(scenario):
    """Covariate dimension implied by a scenario."""
    if scenario.kind == "HeteroScale6":
        return 6
    if scenario.kind == "HeteroScale100":
        return 100
    return scenario.effective_blocks * _BLOCK_SIZE


@dataclass(frozen=True)
class OracleTruth:
    """Generator-known truth: slope function, conditional quantile function,
    and the true-intercept function of the quantile level."""

    p: int
    gamma_star: object  # tau -> length-p slope vector
    intercept_star: object  # tau -> scalar
    q_star: object  # (tau, Z) -> true conditional quantiles at the rows of Z

    def pattern(self, grid):
        """True M x p support at the levels of the grid."""
        active = np.stack([self.gamma_star(t) != 0 for t in grid.taus])
        return SparsityPattern(active)

    def slopes_at(self, grid):
        """True M x p slope matrix at the levels of the grid."""
        return np.stack([self.gamma_star(t) for t in grid.taus])


def _finv(u, error_dist):
    if error_dist == "normal":
        return stats.norm.ppf(u)
    if error_dist == "t3":
        return stats.t.ppf(u, 3)
    if error_dist == "exp1":
        return -np.log1p(-np.asarray(u, dtype=float))
    raise ValueError(f"unknown error distribution {error_dist!r}")


def _block_cov(corr, rho):
    idx = np.arange(_BLOCK_SIZE)
    if corr == "ar":
        return rho ** np.abs(idx[:, None] - idx[None, :])
    return np.full((_BLOCK_SIZE, _BLOCK_SIZE), rho) + (1.0 - rho) * np.eye(_BLOCK_SIZE)


def _branch_index(u):
    u = np.asarray(u)
    return np.where(u <= _BRANCH_EDGES[0], 0, np.where(u <= _BRANCH_EDGES[1], 1, 2))


def _hetero_truth(p):
    def gamma_star(tau):
        g = np.zeros(p)
        g[0] = 1.0
        g[1] = 1.0
        g[5] = 2.0 + 2.0 * stats.norm.ppf(tau)
        return g

    def q_star(tau, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return 1.0 + Z @ gamma_star(tau)

    return OracleTruth(p=p, gamma_star=gamma_star, intercept_star=lambda tau: 1.0, q_star=q_star)


def _block_truth(p, slopes8, error_dist):
    def gamma_star(tau):
        g = np.zeros(p)
        g[:8] = slopes8[int(_branch_index(tau))]
        return g

    def intercept_star(tau):
        return 1.0 + float(_finv(tau, error_dist))

    def q_star(tau, Z):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return intercept_star(tau) + Z[:, :8] @ slopes8[int(_branch_index(tau))]

    return OracleTruth(p=p, gamma_star=gamma_star, intercept_star=intercept_star, q_star=q_star)


def generate(scenario):
    """Draw one dataset from the scenario; returns (Dataset, OracleTruth)."""
    rng = np.random.default_rng(scenario.seed)
    n = scenario.n

    if scenario.kind in ("HeteroScale6", "HeteroScale100"):
        p = scenario_p(scenario)
        Z = rng.uniform(size=(n, p))
        eps = rng.standard_normal(n)
        y = 1.0 + Z[:, 0] + Z[:, 1] + 2.0 * Z[:, 5] + 2.0 * Z[:, 5] * eps
        return Dataset(y=y, Z=Z), _hetero_truth(p)

    blocks = scenario.effective_blocks
    p = blocks * _BLOCK_SIZE
    slopes8 = _BLOCK_SLOPES if scenario.kind == "BlockSparse" else _HIGHDIM_SLOPES
    error_dist = scenario.effective_error_dist

    L = np.linalg.cholesky(_block_cov(scenario.corr, scenario.rho))
    E = rng.standard_normal((n, blocks, _BLOCK_SIZE))
    Z = np.abs(1.0 + E @ L.T).reshape(n, p)
    u = rng.uniform(size=n)
    y = 1.0 + np.einsum("ij,ij->i", Z[:, :8], slopes8[_branch_index(u)]) + _finv(u, error_dist)
    return Dataset(y=y, Z=Z), _block_truth(p, slopes8, error_dist)


def derive_seed(base, *path):
    """Deterministic child seed: the base entropy extended by index path."""
    if isinstance(base, (tuple, list)):
        return tuple(base) + tuple(path)
    return (base,) + tuple(path)


def replication_scenario(scenario, rep, stream, n=None):
    """Scenario for one replication stream (0=train, 1=validation, 2=test)."""
    return replace(
        scenario,
        seed=derive_seed(scenario.seed, rep, stream),
        n=scenario.n if n is None else n,
    )
