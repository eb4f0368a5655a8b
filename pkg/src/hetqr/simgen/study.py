"""Monte-Carlo study harness.

Each replication draws a training set of size n, a validation set of size
``valid_multiplier * n`` for tuning (pick the lambda minimizing the stacked
check loss, ties toward the larger lambda), and a test set of size
``test_multiplier * n`` for the prediction metrics. Replications are
embarrassingly parallel; results are reduced in replication order, and all
randomness derives from the study seed and the replication index, so reruns
are bitwise identical.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import io

import numpy as np

from ..het import HetQrConfig, fit_hetqr, make_weights, make_weights_highdim
from ..model import ZERO_TOL, SparsityPattern
from ..qr_fit import fit_qr, fit_qr_alasso, fit_qr_lasso
from ..tuning import default_lambda_grid, tune_validation
from . import metrics
from .scenarios import generate, replication_scenario, scenario_p

__all__ = ["StudyConfig", "StudyResult", "run_study", "METHODS"]

METHODS = ("qr", "qr-lasso", "qr-alasso", "hetqr")

# text-table columns: label, row key, scale factor
_TABLE_COLUMNS = (
    ("Model-size", "model_size", 1.0),
    ("FM (%)", "fm", 100.0),
    ("PEE x100", "pee", 100.0),
    ("QPE x1000", "qpe", 1000.0),
    ("PE x1000", "pe", 1000.0),
)


@dataclass(frozen=True)
class StudyConfig:
    """Harness knobs; ``lambdas=None`` selects the default grid for n."""

    lambdas: object = None
    valid_multiplier: int = 10
    test_multiplier: int = 100
    zero_tol: float = ZERO_TOL
    hetqr: HetQrConfig = field(default_factory=HetQrConfig)
    jobs: int = 1


@dataclass
class StudyResult:
    scenario: object
    methods: tuple
    replications: int
    rows: list  # per (rep, method) metric dicts
    failures: list  # (rep, method, message)
    notes: list

    @property
    def trace_violations(self):
        return sum(r.get("trace_violations", 0) for r in self.rows)

    @property
    def nonconverged(self):
        return sum(r.get("nonconverged", 0) for r in self.rows)

    def metric_values(self, method, key):
        return np.array([r[key] for r in self.rows if r["method"] == method])

    def aggregate(self):
        """Per-method mean and standard error of the sample mean, per metric."""
        out = {}
        for method in self.methods:
            rows = [r for r in self.rows if r["method"] == method]
            if not rows:
                continue
            agg = {"reps": len(rows)}
            for key in ("model_size", "fm", "pee", "qpe", "pe"):
                vals = np.array([r[key] for r in rows], dtype=float)
                mean = float(vals.mean())
                se = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
                agg[key] = (mean, se)
            out[method] = agg
        return out

    def to_text(self):
        agg = self.aggregate()
        buf = io.StringIO()
        sc = self.scenario
        extra = ""
        if sc.kind in ("BlockSparse", "HighDim600"):
            extra = f" corr={sc.corr} errors={sc.effective_error_dist}"
        buf.write(
            f"Scenario {sc.kind} (n={sc.n}, p={scenario_p(sc)}{extra}), "
            f"{self.replications} replications, seed={sc.seed}\n"
        )
        header = ["Method"] + [label for label, _, _ in _TABLE_COLUMNS]
        table = [header]
        for method in self.methods:
            if method not in agg:
                continue
            a = agg[method]
            cells = [method]
            for _, key, scale in _TABLE_COLUMNS:
                if method == "qr" and key == "fm":
                    cells.append("-")
                    continue
                mean, se = a[key]
                if method == "qr" and key == "model_size":
                    cells.append(f"{mean:.0f}")
                else:
                    cells.append(f"{mean * scale:.1f}({se * scale:.1f})")
            table.append(cells)
        widths = [max(len(row[c]) for row in table) for c in range(len(header))]
        for row in table:
            buf.write("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() + "\n")
        for note in self.notes:
            buf.write(f"note: {note}\n")
        if self.failures:
            buf.write(f"failures: {len(self.failures)} replication fits excluded\n")
            for rep, method, msg in self.failures:
                buf.write(f"  rep {rep} {method}: {msg}\n")
        return buf.getvalue()

    def to_csv(self):
        agg = self.aggregate()
        lines = ["method,reps,model_size,model_size_se,fm,fm_se,pee,pee_se,qpe,qpe_se,pe,pe_se"]
        for method in self.methods:
            if method not in agg:
                continue
            a = agg[method]
            cells = [method, str(a["reps"])]
            for key in ("model_size", "fm", "pee", "qpe", "pe"):
                mean, se = a[key]
                cells += [f"{mean:.10g}", f"{se:.10g}"]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def reps_csv(self):
        keys = ("rep", "method", "lam", "model_size", "fm", "pee", "qpe", "pe")
        lines = [",".join(keys)]
        for r in sorted(self.rows, key=lambda r: (r["rep"], r["method"])):
            lines.append(
                ",".join(
                    f"{r[k]:.10g}" if isinstance(r[k], float) else str(r[k]) for k in keys
                )
            )
        return "\n".join(lines) + "\n"


def _hetqr_tuned(train, valid, grid, lambdas, cfg, pilot=None):
    """Tune the group-penalized estimator; returns (report, lam, diagnostics)."""
    reports = {}
    if train.n > train.p:
        base = make_weights(train, grid, weight_clip=cfg.weight_clip, pilot=pilot)

        def fitter(tr, g, lam):
            rep = fit_hetqr(tr, g, base.with_lambda(lam), cfg, init_coef=pilot)
            reports[lam] = rep
            return rep

    else:
        def fitter(tr, g, lam):
            cfg_l = replace(cfg, lambda_n=lam)
            w = make_weights_highdim(tr, g, cfg_l)
            rep = fit_hetqr(tr, g, w, cfg_l)
            reports[lam] = rep
            return rep

    result = tune_validation(train, valid, grid, lambdas, fitter)
    best = reports[result.best_lambda]
    diag = {
        "trace_violations": sum(
            int(np.any(np.diff(r.objective_trace) > 1e-10)) for r in reports.values()
        ),
        "nonconverged": sum(int(not r.converged) for r in reports.values()),
    }
    return best, result.best_lambda, diag


def _fit_method(method, train, valid, grid, lambdas, cfg, qr_pilot):
    """Returns (coef, pattern, lam, diagnostics) for one estimator.

    ``qr_pilot`` is the shared per-replication unpenalized fit (None when
    p >= n); qr reports it, qr-alasso and hetqr reuse it as pilot.
    """
    diag = {}
    if method == "qr":
        coef = qr_pilot if qr_pilot is not None else fit_qr(train, grid)
        # no selection: every slope counts as part of the model
        return coef, SparsityPattern.full(grid.m, train.p), 0.0, diag
    if method == "qr-lasso":
        res = tune_validation(train, valid, grid, lambdas, fit_qr_lasso)
        coef, lam = res.best_coef, res.best_lambda
    elif method == "qr-alasso":
        if qr_pilot is not None:
            pilot = qr_pilot
        else:
            pilot = tune_validation(train, valid, grid, lambdas, fit_qr_lasso).best_coef
        res = tune_validation(
            train, valid, grid, lambdas,
            lambda tr, g, lam: fit_qr_alasso(tr, g, lam, pilot=pilot),
        )
        coef, lam = res.best_coef, res.best_lambda
    elif method == "hetqr":
        report, lam, diag = _hetqr_tuned(train, valid, grid, lambdas, cfg, pilot=qr_pilot)
        coef = report.coef
    else:
        raise ValueError(f"unknown estimator {method!r}; choose from {METHODS}")
    return coef, None, lam, diag


def _one_rep(scenario, rep, methods, grid, config):
    train, truth = generate(replication_scenario(scenario, rep, 0))
    valid, _ = generate(
        replication_scenario(scenario, rep, 1, n=scenario.n * config.valid_multiplier)
    )
    test, _ = generate(
        replication_scenario(scenario, rep, 2, n=scenario.n * config.test_multiplier)
    )
    lambdas = config.lambdas
    if lambdas is None:
        lambdas = default_lambda_grid(train.n)
    truth_slopes = truth.slopes_at(grid)
    truth_pattern = truth.pattern(grid)

    needs_pilot = train.n > train.p and any(
        m in methods for m in ("qr", "qr-alasso", "hetqr")
    )
    qr_pilot = fit_qr(train, grid) if needs_pilot else None

    rows, failures = [], []
    for method in methods:
        try:
            coef, pattern, lam, diag = _fit_method(
                method, train, valid, grid, lambdas, config.hetqr, qr_pilot
            )
            if pattern is None:
                pattern = SparsityPattern.from_coef(coef, config.zero_tol)
            rows.append(
                {
                    "rep": rep,
                    "method": method,
                    "lam": float(lam),
                    "model_size": metrics.model_size(pattern),
                    "fm": metrics.f_measure(pattern, truth_pattern),
                    "pee": metrics.pee(coef, truth_slopes),
                    "qpe": metrics.qpe(coef, truth, test, grid),
                    "pe": metrics.pe(coef, test, grid),
                    **diag,
                }
            )
        except Exception as exc:  # noqa: BLE001 - record and continue
            failures.append((rep, method, f"{type(exc).__name__}: {exc}"))
    return rows, failures


def run_study(scenario, estimators, replications, grid, config=StudyConfig()):
    """Run the full study; returns a StudyResult with per-replication rows.

    Estimators not applicable to the scenario (the unpenalized fit when
    p >= n) are dropped with a note. ``config.jobs > 1`` runs replications
    in parallel worker processes.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    methods = tuple(estimators)
    notes = []
    if scenario_p(scenario) >= scenario.n and "qr" in methods:
        methods = tuple(m for m in methods if m != "qr")
        notes.append("omitted qr: the unpenalized fit is not designed for p >= n")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown estimator {m!r}; choose from {METHODS}")

    args = [(scenario, rep, methods, grid, config) for rep in range(replications)]
    if config.jobs > 1 and replications > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_one_rep_worker, args))
    else:
        results = [_one_rep(*a) for a in args]

    rows, failures = [], []
    for reprows, repfail in results:
        rows.extend(reprows)
        failures.extend(repfail)
    return StudyResult(
        scenario=scenario,
        methods=methods,
        replications=replications,
        rows=rows,
        failures=failures,
        notes=notes,
    )


def _one_rep_worker(args):
    # one BLAS thread per worker: the replications already occupy all cores
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return _one_rep(*args)
    with threadpool_limits(limits=1):
        return _one_rep(*args)
