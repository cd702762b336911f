import numpy as np
import pytest
from scipy.optimize import minimize

from tfmm_interp.core import NotAtEquilibrium, PoolState, PriceVector, Scheme, TFMMError, Trajectory, validate_weights
from tfmm_interp.optimizer import (
    OptimizerConfig,
    log_objective,
    optimal_trajectory,
    optimize_trajectory,
    trajectory_objective_gradient,
)
from tfmm_interp.reserves import trajectory_value
from tfmm_interp.schemes import InterpolationRequest, approx_optimal_trajectory

from conftest import EXAMPLE_END, EXAMPLE_START, random_simplex


def _setup(w0, wf, f, prices=None):
    req = InterpolationRequest(w0, wf, f)
    p = PriceVector.normalised(prices if prices is not None else np.ones(len(req.w_start)))
    pool = PoolState.at_equilibrium(1000.0, req.w_start, p)
    return req, pool, p


def _slsqp_oracle(w0, wf, f):
    """Independent optimum over the interior steps, parametrised directly and constrained to the simplex."""
    w0, wf = np.asarray(w0), np.asarray(wf)
    n = w0.size
    x0 = np.array([(1 - k / f) * w0 + k / f * wf for k in range(1, f)]).ravel()

    def neg(x):
        return -log_objective(np.vstack([w0, x.reshape(f - 1, n), wf]))

    cons = [{"type": "eq", "fun": (lambda x, k=k: x.reshape(f - 1, n)[k].sum() - 1.0)} for k in range(f - 1)]
    res = minimize(neg, x0, method="SLSQP", bounds=[(1e-6, 1)] * x0.size, constraints=cons,
                   options={"ftol": 1e-15, "maxiter": 1000})
    return np.vstack([w0, res.x.reshape(f - 1, n), wf]), -res.fun


class TestOptimizer:
    def test_example_converges(self):
        req, pool, p = _setup(EXAMPLE_START, EXAMPLE_END, 1000)
        res = optimize_trajectory(req, pool, p)
        assert res.converged
        assert res.iterations_used < 50
        assert res.trajectory.scheme_label is Scheme.NUMERICAL_OPTIMAL
        assert res.final_value == pytest.approx(trajectory_value(pool, res.trajectory, p), rel=1e-12)
        assert res.final_value >= trajectory_value(pool, approx_optimal_trajectory(req), p)

    def test_history_non_decreasing(self):
        req, pool, p = _setup(EXAMPLE_START, EXAMPLE_END, 200)
        res = optimize_trajectory(req, pool, p, OptimizerConfig(method="softmax", max_iterations=300))
        h = np.array(res.objective_history)
        assert np.all(np.diff(h) >= 0)

    @pytest.mark.filterwarnings("ignore:Values in x were outside bounds")
    @pytest.mark.parametrize("f", [2, 3, 5, 8])
    def test_matches_slsqp(self, f, rng):
        for _ in range(3):
            n = int(rng.integers(2, 5))
            a, b = random_simplex(rng, n, 0.05), random_simplex(rng, n, 0.05)
            req, pool, p = _setup(a, b, f)
            res = optimize_trajectory(req, pool, p)
            steps, best = _slsqp_oracle(a, b, f)
            assert log_objective(res.trajectory.steps) >= best - 1e-10
            np.testing.assert_allclose(res.trajectory.steps, steps, atol=1e-5)

    def test_newton_and_softmax_agree(self, rng):
        for _ in range(5):
            n = int(rng.integers(2, 5))
            a, b = random_simplex(rng, n, 0.05), random_simplex(rng, n, 0.05)
            req, pool, p = _setup(a, b, 6)
            newton = optimize_trajectory(req, pool, p)
            soft = optimize_trajectory(req, pool, p, OptimizerConfig(method="softmax", max_iterations=20000))
            assert soft.final_value == pytest.approx(newton.final_value, rel=1e-9)
            np.testing.assert_allclose(soft.trajectory.steps, newton.trajectory.steps, atol=1e-4)

    @pytest.mark.parametrize(
        "w0, wf",
        [([1e-5, 0.5, 0.5 - 1e-5], [0.98, 0.01, 0.01]), ([0.001, 0.999], [0.999, 0.001]), ([2e-6, 1 - 2e-6], [0.5, 0.5])],
    )
    def test_extreme_endpoints_stay_interior(self, w0, wf):
        req, pool, p = _setup(w0, wf, 100)
        res = optimize_trajectory(req, pool, p)
        assert res.converged
        interior = res.trajectory.steps[1:-1]
        # no bound becomes active: every interior weight stays above the smallest endpoint weight
        assert interior.min() > min(min(w0), min(wf))

    def test_price_independent(self):
        req = InterpolationRequest([0.2, 0.3, 0.5], [0.4, 0.4, 0.2], 50)
        t1 = optimal_trajectory(req)
        _, pool, p = _setup([0.2, 0.3, 0.5], [0.4, 0.4, 0.2], 50, prices=[1.0, 7.0, 0.01])
        t2 = optimize_trajectory(req, pool, p).trajectory
        np.testing.assert_allclose(t1.steps, t2.steps, atol=1e-9)

    def test_single_step_returns_immediately(self):
        req, pool, p = _setup([0.5, 0.5], [0.6, 0.4], 1)
        res = optimize_trajectory(req, pool, p)
        assert res.converged and res.iterations_used == 0
        np.testing.assert_array_equal(res.trajectory.steps, [[0.5, 0.5], [0.6, 0.4]])

    def test_reports_non_convergence(self):
        req, pool, p = _setup(EXAMPLE_START, EXAMPLE_END, 500)
        res = optimize_trajectory(req, pool, p, OptimizerConfig(max_iterations=1, gradient_tolerance=1e-300, method="softmax"))
        assert not res.converged
        assert res.iterations_used == 1
        assert np.isfinite(res.final_value)

    def test_requires_equilibrium(self):
        req = InterpolationRequest([0.5, 0.5], [0.6, 0.4], 4)
        with pytest.raises(NotAtEquilibrium):
            optimize_trajectory(req, PoolState([1.0, 2.0], validate_weights([0.5, 0.5])), PriceVector.ones(2))

    def test_start_must_match_pool(self):
        req = InterpolationRequest([0.5, 0.5], [0.6, 0.4], 4)
        pool = PoolState.at_equilibrium(1.0, validate_weights([0.4, 0.6]), PriceVector.ones(2))
        with pytest.raises(TFMMError):
            optimize_trajectory(req, pool, PriceVector.ones(2))

    @pytest.mark.parametrize(
        "kw", [{"max_iterations": 0}, {"gradient_tolerance": 0.0}, {"step_size": -1.0},
               {"step_decay": 0.0}, {"epsilon_bound": 0.0}, {"method": "adam"}],
    )
    def test_config_validation(self, kw):
        with pytest.raises(TFMMError):
            OptimizerConfig(**kw)


class TestObjectiveGradient:
    def test_finite_difference(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 5))
            f = int(rng.integers(2, 8))
            steps = np.array([random_simplex(rng, n, 0.05) for _ in range(f + 1)])
            traj = Trajectory(steps, "linear")
            p = PriceVector.normalised(rng.uniform(0.5, 2, n))
            pool = PoolState.at_equilibrium(100.0, validate_weights(steps[0]), p)
            g = trajectory_objective_gradient(traj, pool, p)
            assert g.shape == (f - 1, n)

            def value(s):
                r = pool.reserves * (s[-1] / s[0]) * np.exp(log_objective(s))
                return float(p.prices @ r)

            for k in range(1, f):
                for j in range(n):
                    h = 1e-6 * steps[k, j]
                    up, dn = steps.copy(), steps.copy()
                    up[k, j] += h
                    dn[k, j] -= h
                    fd = (value(up) - value(dn)) / (2 * h)
                    assert g[k - 1, j] == pytest.approx(fd, rel=1e-5, abs=1e-7)

    def test_empty_for_single_step(self):
        traj = Trajectory(np.array([[0.5, 0.5], [0.6, 0.4]]), "one_step")
        pool = PoolState([1.0, 1.0], validate_weights([0.5, 0.5]))
        assert trajectory_objective_gradient(traj, pool, PriceVector.ones(2)).shape == (0, 2)
