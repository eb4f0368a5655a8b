import numpy as np
import pytest

from conftest import brute_force_pinball, random_pinball_problem
from hetqr.lp_core import (
    PinballProblem,
    SolverOptions,
    SolverStatus,
    pinball_objective,
    solve_penalized_qr,
    solve_pinball,
)
from hetqr.model import Dataset
from hetqr.qr_fit import fit_qr


class TestProblemValidation:
    def test_rejects_bad_levels_and_weights(self):
        X = np.ones((2, 1))
        y = np.zeros(2)
        with pytest.raises(ValueError):
            PinballProblem(X=X, y=y, t=np.array([0.0, 0.5]))
        with pytest.raises(ValueError):
            PinballProblem(X=X, y=y, t=np.full(2, 0.5), w=np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            PinballProblem(X=X, y=np.array([np.inf, 0.0]), t=np.full(2, 0.5))


class TestSolvePinball:
    def test_median(self):
        prob = PinballProblem(X=np.ones((3, 1)), y=np.array([1.0, 2.0, 3.0]), t=np.full(3, 0.5))
        sol = solve_pinball(prob)
        assert sol.status is SolverStatus.OPTIMAL
        assert sol.beta[0] == pytest.approx(2.0, abs=1e-7)

    def test_lower_quartile_unique(self):
        # 5 points at t=0.25: minimizer is the 2nd order statistic
        y = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        prob = PinballProblem(X=np.ones((5, 1)), y=y, t=np.full(5, 0.25))
        sol = solve_pinball(prob)
        # grid-search oracle over the data points (intercept-only minimizer
        # is attained at an order statistic)
        objs = [pinball_objective(prob, np.array([v])) for v in y]
        assert sol.objective == pytest.approx(min(objs), abs=1e-8)
        assert sol.beta[0] == pytest.approx(2.0, abs=1e-7)

    def test_exact_interpolation(self):
        X = np.array([[1.0, 0.0], [1.0, 1.0]])
        prob = PinballProblem(X=X, y=np.array([0.0, 1.0]), t=np.full(2, 0.5))
        sol = solve_pinball(prob)
        assert sol.objective == pytest.approx(0.0, abs=1e-10)
        assert np.allclose(sol.beta, [0.0, 1.0], atol=1e-7)

    def test_objective_matches_recomputed_loss(self):
        rng = np.random.default_rng(0)
        prob = random_pinball_problem(rng, max_r=50, max_q=4)
        sol = solve_pinball(prob)
        assert sol.objective == pytest.approx(pinball_objective(prob, sol.beta), rel=1e-12)

    def test_dual_within_unit_box(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            sol = solve_pinball(random_pinball_problem(rng, max_r=30, max_q=3))
            assert sol.dual is not None
            assert np.all(sol.dual >= -1e-9) and np.all(sol.dual <= 1 + 1e-9)

    def test_never_beaten_by_perturbations(self):
        # I1: returned objective <= objective at 0 and at 100 unit-scaled
        # perturbations of the solution
        rng = np.random.default_rng(2)
        for _ in range(5):
            prob = random_pinball_problem(rng, max_r=40, max_q=3)
            sol = solve_pinball(prob)
            assert sol.objective <= pinball_objective(prob, np.zeros(prob.q)) + 1e-7
            for _ in range(100):
                delta = rng.standard_normal(prob.q)
                delta *= 1e-3 / np.linalg.norm(delta)
                assert sol.objective <= pinball_objective(prob, sol.beta + delta) + 1e-9

    def test_subgradient_optimality(self):
        # I2 for the intercept-only problem: the count of strictly negative
        # residuals is <= r*t and the count of nonpositive residuals >= r*t
        rng = np.random.default_rng(3)
        for _ in range(20):
            r = int(rng.integers(3, 40))
            t = float(rng.uniform(0.1, 0.9))
            y = rng.standard_normal(r)
            sol = solve_pinball(PinballProblem(X=np.ones((r, 1)), y=y, t=np.full(r, t)))
            resid = y - sol.beta[0]
            assert np.sum(resid < -1e-6) <= r * t + 1e-9
            assert np.sum(resid <= 1e-6) >= r * t - 1e-9

    def test_subgradient_box_general(self):
        # I2 general: X'(t - 1{resid<0}) must lie inside the subdifferential
        # box spanned by the rows with (numerically) zero residuals
        rng = np.random.default_rng(4)
        for _ in range(20):
            prob = random_pinball_problem(rng, max_r=30, max_q=3)
            sol = solve_pinball(prob)
            resid = prob.y - prob.X @ sol.beta
            tol = 1e-6
            interp = np.abs(resid) <= tol
            sign_term = prob.t - (resid < -tol)
            g = (prob.X * (prob.w * sign_term)[:, None])[~interp].sum(axis=0)
            slack = (np.abs(prob.X) * prob.w[:, None])[interp].sum(axis=0)
            assert np.all(np.abs(g) <= slack + tol * prob.r)

    def test_equivariance(self):
        # I3: shifting y shifts only the intercept; scaling y scales beta
        rng = np.random.default_rng(5)
        n = 40
        X = np.c_[np.ones(n), rng.standard_normal((n, 2))]
        y = X @ np.array([1.0, 2.0, -1.0]) + rng.standard_normal(n)
        t = np.full(n, 0.3)
        base = solve_pinball(PinballProblem(X=X, y=y, t=t))
        shifted = solve_pinball(PinballProblem(X=X, y=y + 5.0, t=t))
        assert shifted.beta[0] == pytest.approx(base.beta[0] + 5.0, abs=1e-6)
        assert np.allclose(shifted.beta[1:], base.beta[1:], atol=1e-6)
        scaled = solve_pinball(PinballProblem(X=X, y=3.0 * y, t=t))
        assert np.allclose(scaled.beta, 3.0 * base.beta, atol=1e-6)

    def test_brute_force_oracle_small_instances(self):
        # I4 on a quick sample; the 200-instance version runs in acceptance
        rng = np.random.default_rng(6)
        for _ in range(40):
            prob = random_pinball_problem(rng)
            sol = solve_pinball(prob)
            _, best = brute_force_pinball(prob)
            assert sol.objective <= best + 1e-6

    def test_degenerate_inputs_solve(self):
        sol = solve_pinball(
            PinballProblem(X=np.ones((6, 1)), y=np.full(6, 3.0), t=np.full(6, 0.3))
        )
        assert sol.status is SolverStatus.OPTIMAL
        assert sol.objective == pytest.approx(0.0, abs=1e-9)
        X = np.tile(np.array([[1.0, 2.0], [1.0, 2.0], [1.0, 5.0]]), (2, 1))
        y = np.array([1.0, 1.0, 4.0, 1.0, 1.0, 4.0])
        sol = solve_pinball(PinballProblem(X=X, y=y, t=np.full(6, 0.5)))
        assert sol.objective == pytest.approx(0.0, abs=1e-8)

    def test_iteration_limit_status(self):
        rng = np.random.default_rng(7)
        prob = random_pinball_problem(rng, max_r=50, max_q=3)
        sol = solve_pinball(prob, SolverOptions(max_iter=1))
        assert sol.status is SolverStatus.ITERATION_LIMIT


class TestSolvePenalizedQr:
    def _data(self, seed=0, n=30, p=3):
        rng = np.random.default_rng(seed)
        Z = rng.standard_normal((n, p))
        y = 1.0 + Z @ np.linspace(2, -1, p) + rng.standard_normal(n)
        return Dataset(y=y, Z=Z)

    def test_zero_penalty_matches_unpenalized(self):
        data = self._data()
        grid_tau = 0.5
        i0, s0 = solve_penalized_qr(data, grid_tau, np.zeros(data.p))
        prob = PinballProblem(
            X=np.c_[np.ones(data.n), data.Z], y=data.y, t=np.full(data.n, grid_tau)
        )
        sol = solve_pinball(prob)
        assert i0 == pytest.approx(sol.beta[0], abs=1e-6)
        assert np.allclose(s0, sol.beta[1:], atol=1e-6)

    def test_huge_penalty_gives_quantile_intercept(self):
        # odd n so the sample quantile is unique
        data = self._data(n=31)
        for tau in (0.25, 0.5, 0.75):
            icpt, slopes = solve_penalized_qr(data, tau, np.full(data.p, 1e6))
            assert np.all(slopes == 0.0)
            assert icpt == pytest.approx(
                np.quantile(data.y, tau, method="inverted_cdf"), abs=1e-6
            )

    def test_matches_vertex_oracle_with_penalty(self):
        # n=6, p=1, lam=0.5: oracle solves the augmented pseudo-row problem
        rng = np.random.default_rng(8)
        for _ in range(20):
            n, lam, tau = 6, 0.5, float(rng.uniform(0.2, 0.8))
            Z = rng.standard_normal((n, 1))
            y = rng.standard_normal(n)
            data = Dataset(y=y, Z=Z)
            icpt, slopes = solve_penalized_qr(data, tau, np.array([lam]))
            Xa = np.vstack([np.c_[np.ones(n), Z], [[0.0, 2 * lam]]])
            prob = PinballProblem(
                X=Xa,
                y=np.concatenate([y, [0.0]]),
                t=np.concatenate([np.full(n, tau), [0.5]]),
            )
            _, best = brute_force_pinball(prob)
            ours = pinball_objective(prob, np.array([icpt, slopes[0]]))
            assert ours <= best + 1e-6

    def test_screening_matches_full_solve(self):
        # the safe exclusion rule must not change the solution
        data = self._data(seed=9, n=25, p=4)
        lam = np.array([0.1, 50.0, 1e4, 0.0])
        icpt, slopes = solve_penalized_qr(data, 0.5, lam)
        # replicate without screening by solving the raw augmented problem
        pen_rows = [(j, l) for j, l in enumerate(lam) if l > 0]
        Xa = np.zeros((data.n + len(pen_rows), data.p + 1))
        Xa[: data.n, 0] = 1.0
        Xa[: data.n, 1:] = data.Z
        for k, (j, l) in enumerate(pen_rows):
            Xa[data.n + k, 1 + j] = 2 * l
        prob = PinballProblem(
            X=Xa,
            y=np.concatenate([data.y, np.zeros(len(pen_rows))]),
            t=np.concatenate([np.full(data.n, 0.5), np.full(len(pen_rows), 0.5)]),
        )
        sol = solve_pinball(prob)
        ours = pinball_objective(prob, np.concatenate([[icpt], slopes]))
        assert ours <= sol.objective + 1e-7

    def test_rejects_negative_penalties(self):
        data = self._data()
        with pytest.raises(ValueError):
            solve_penalized_qr(data, 0.5, np.array([-1.0, 0.0, 0.0]))
