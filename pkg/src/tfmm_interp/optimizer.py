"""Numerically optimal weight trajectories at constant prices and zero fees.

With prices fixed, the final pool value is

    p . R(t_f) = (p . R(t_0) * w(t_f) / w(t_0)) * exp(L),
    L = sum_{k=1..f} sum_j w_j(t_k) * (log w_j(t_{k-1}) - log w_j(t_k)),

so maximising value means maximising L over the interior steps, each
constrained to the simplex. L is minus a chain of KL divergences between
neighbouring steps, hence concave with a unique maximiser.

Two solvers share one line search:

* ``"newton"`` (default): Newton steps on the equality-constrained problem.
  The Hessian of L is tridiagonal along k for every token and the simplex
  constraints couple tokens per step, so the KKT system is sparse and banded.
* ``"softmax"``: gradient ascent on unconstrained logits mapped through a
  softmax per step. Slow for long trajectories; kept as an independent route
  for small problems.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    DEFAULT_EPSILON,
    DimensionMismatch,
    PoolState,
    PriceVector,
    Scheme,
    TFMMError,
    Trajectory,
)
from .reserves import check_equilibrium, closed_form_final_reserves
from .schemes import InterpolationRequest, approx_optimal_trajectory

log = logging.getLogger(__name__)

ARMIJO = 1e-4
SOFTMAX_MIX = 1e-9


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 5000
    # absolute tolerance on the projected value gradient; None means 1e-10 * p.R(t_0)
    gradient_tolerance: float | None = None
    step_size: float = 0.1
    step_decay: float = 0.5
    epsilon_bound: float = DEFAULT_EPSILON
    seed: int = 0
    method: str = "newton"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise TFMMError("max_iterations must be >= 1")
        if self.gradient_tolerance is not None and not self.gradient_tolerance > 0:
            raise TFMMError("gradient_tolerance must be positive")
        if not self.step_size > 0:
            raise TFMMError("step_size must be positive")
        if not 0 < self.step_decay <= 1:
            raise TFMMError("step_decay must be in (0, 1]")
        if not self.epsilon_bound > 0:
            raise TFMMError("epsilon_bound must be positive")
        if self.method not in ("newton", "softmax"):
            raise TFMMError(f"unknown optimizer method {self.method!r}")


@dataclass
class OptimizerResult:
    trajectory: Trajectory
    final_value: float
    iterations_used: int
    converged: bool
    objective_history: list = field(default_factory=list)
    gradient_norm: float = float("nan")


def log_objective(steps: np.ndarray) -> float:
    s = np.asarray(steps, dtype=float)
    return float(np.sum(s[1:] * (np.log(s[:-1]) - np.log(s[1:]))))


def log_objective_gradient(steps: np.ndarray) -> np.ndarray:
    """dL/dw_j(t_k) for interior k = 1..f-1, shape (f-1, N)."""
    s = np.asarray(steps, dtype=float)
    return np.log(s[:-2]) - np.log(s[1:-1]) - 1.0 + s[2:] / s[1:-1]


def _tangent(g: np.ndarray) -> np.ndarray:
    return g - g.mean(axis=1, keepdims=True)


def trajectory_objective_gradient(
    traj: Trajectory, pool: PoolState, prices: PriceVector
) -> np.ndarray:
    """Gradient of p . R(t_f) with respect to every interior weight w_i(t_k).

    Components are treated as independent (no simplex projection); returns an
    (f-1, N) array, empty when f = 1.
    """
    if traj.n != pool.n or len(prices) != pool.n:
        raise DimensionMismatch("trajectory, pool and prices differ in token count")
    value = float(np.dot(prices.prices, closed_form_final_reserves(pool.reserves, traj.steps)))
    return value * log_objective_gradient(traj.steps)


def _kkt_matrix(steps: np.ndarray) -> sp.csc_matrix:
    # variables ordered k-major: index (k-1)*N + j for interior k; then one multiplier per step
    m, n = steps.shape[0] - 2, steps.shape[1]
    nv = m * n
    prev, cur, nxt = steps[:-2], steps[1:-1], steps[2:]
    diag = (-1.0 / cur - nxt / cur**2).ravel()
    off = (1.0 / cur[:-1]).ravel()  # couples (k, j) with (k+1, j)
    idx = np.arange(nv)
    rows = [idx, idx[:-n], idx[n:]]
    cols = [idx, idx[n:], idx[:-n]]
    vals = [diag, off, off]
    con = nv + np.repeat(np.arange(m), n)
    rows += [con, idx]
    cols += [idx, con]
    vals += [np.ones(nv), np.ones(nv)]
    return sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nv + m, nv + m),
    )


def _newton_direction(steps: np.ndarray, grad: np.ndarray) -> np.ndarray:
    m, n = grad.shape
    rhs = np.concatenate([-grad.ravel(), np.zeros(m)])
    sol = spla.spsolve(_kkt_matrix(steps), rhs)
    return sol[: m * n].reshape(m, n)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    s = e / e.sum(axis=1, keepdims=True)
    return (1.0 - SOFTMAX_MIX) * s + SOFTMAX_MIX / z.shape[1]


def _softmax_pullback(z: np.ndarray, g: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    s = e / e.sum(axis=1, keepdims=True)
    return (1.0 - SOFTMAX_MIX) * s * (g - np.sum(s * g, axis=1, keepdims=True))


def _base_value(req: InterpolationRequest, pool: PoolState, prices: PriceVector) -> float:
    # p . R(t_0) * w(t_f)/w(t_0): final value when L = 0
    scaled = pool.reserves * req.w_end.weights / req.w_start.weights
    return float(np.dot(prices.prices, scaled))


def optimize_trajectory(
    req: InterpolationRequest,
    pool: PoolState,
    prices: PriceVector,
    cfg: OptimizerConfig | None = None,
) -> OptimizerResult:
    """Maximise p . R(t_f) over the interior steps of a trajectory.

    Starts from the approximately-optimal trajectory, so the result is never
    worse than it. ``objective_history`` records log p . R(t_f) after every
    accepted step and is strictly increasing. If the projected gradient does
    not reach ``gradient_tolerance`` before the iteration cap, or the line
    search can no longer improve the objective in floating point, the best
    iterate is returned with ``converged=False``. The softmax method typically
    stalls around 1e-9 relative, short of the default tolerance.
    """
    cfg = cfg or OptimizerConfig()
    if pool.n != len(req.w_start) or len(prices) != pool.n:
        raise DimensionMismatch("request, pool and prices differ in token count")
    check_equilibrium(pool, prices)
    if not np.allclose(pool.weights.weights, req.w_start.weights, rtol=0.0, atol=1e-10):
        raise TFMMError("pool weights differ from the request's start weights")

    v0 = float(np.dot(prices.prices, pool.reserves))
    tol = cfg.gradient_tolerance if cfg.gradient_tolerance is not None else 1e-10 * v0
    base = _base_value(req, pool, prices)
    log_base = np.log(base)
    eps = min(cfg.epsilon_bound, req.epsilon_bound)

    steps = np.array(approx_optimal_trajectory(req).steps)
    f = req.num_steps
    obj = log_objective(steps)
    history = [log_base + obj]

    def value_grad_norm(s):
        g = log_objective_gradient(s)
        return g, base * np.exp(log_objective(s)) * float(np.linalg.norm(_tangent(g)))

    if f < 2:
        traj = Trajectory(steps, Scheme.NUMERICAL_OPTIMAL, eps)
        return OptimizerResult(traj, base * np.exp(obj), 0, True, history, 0.0)

    g, gnorm = value_grad_norm(steps)
    converged = gnorm <= tol
    it = 0
    if cfg.method == "newton":
        while not converged and it < cfg.max_iterations:
            d = _newton_direction(steps, g)
            slope = float(np.sum(g * d))
            if not slope > 0:
                # KKT solve lost accuracy; fall back to the tangent gradient
                d = _tangent(g)
                slope = float(np.sum(g * d))
            t = 1.0
            accepted = False
            while t > 1e-16:
                trial = steps.copy()
                trial[1:-1] += t * d
                if np.all(trial[1:-1] > eps):
                    trial[1:-1] /= trial[1:-1].sum(axis=1, keepdims=True)
                    new_obj = log_objective(trial)
                    if new_obj >= obj + ARMIJO * t * slope:
                        accepted = True
                        break
                t *= cfg.step_decay if cfg.step_decay < 1 else 0.5
            it += 1
            if not accepted or new_obj <= obj:
                # no representable improvement left
                log.debug("line search stalled at iteration %d", it)
                break
            steps, obj = trial, new_obj
            history.append(log_base + obj)
            g, gnorm = value_grad_norm(steps)
            converged = gnorm <= tol
            log.debug("newton iter %d: log value %.17g, grad %.3g", it, history[-1], gnorm)
    else:
        z = np.log(steps[1:-1])
        lr = cfg.step_size
        while not converged and it < cfg.max_iterations:
            gz = _softmax_pullback(z, g)
            sq = float(np.sum(gz * gz))
            t = lr
            accepted = False
            while t > 1e-20:
                zt = z + t * gz
                trial = steps.copy()
                trial[1:-1] = _softmax(zt)
                if np.all(trial[1:-1] > eps):
                    new_obj = log_objective(trial)
                    if new_obj >= obj + ARMIJO * t * sq:
                        accepted = True
                        break
                t *= cfg.step_decay if cfg.step_decay < 1 else 0.5
            it += 1
            if not accepted or new_obj <= obj:
                log.debug("line search stalled at iteration %d", it)
                break
            z, steps, obj = zt, trial, new_obj
            history.append(log_base + obj)
            g, gnorm = value_grad_norm(steps)
            converged = gnorm <= tol
            # let the trial step grow back after easy iterations
            lr = max(t / (cfg.step_decay if cfg.step_decay < 1 else 0.5), cfg.step_size)

    traj = Trajectory(steps, Scheme.NUMERICAL_OPTIMAL, eps)
    if not converged:
        log.info("optimizer stopped after %d iterations, gradient norm %.3g > %.3g", it, gnorm, tol)
    return OptimizerResult(traj, base * np.exp(obj), it, bool(converged), history, gnorm)


def optimal_trajectory(req: InterpolationRequest, cfg: OptimizerConfig | None = None) -> Trajectory:
    """Numerically optimal trajectory; independent of prices and pool size."""
    n = len(req.w_start)
    prices = PriceVector.ones(n)
    pool = PoolState.at_equilibrium(1.0, req.w_start, prices)
    return optimize_trajectory(req, pool, prices, cfg).trajectory
