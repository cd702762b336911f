"""Reserve changes of a G3M pool whose weights move while market prices stay fixed.

After a weight change from ``w`` to ``w'`` and the arbitrage trade that
restores equilibrium, reserves become

    R'_i = R_i * (w'_i / w_i) * prod_j (w_j / w'_j) ** w'_j

Everything here works in log space; the per-step factor is a long product of
numbers close to one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionMismatch,
    InvalidDelta,
    MidpointOutOfRange,
    NotAtEquilibrium,
    PoolState,
    PriceVector,
    StartMismatch,
    Trajectory,
    WeightVector,
    as_weights,
    pool_value,
)

EQUILIBRIUM_RTOL = 1e-6


@dataclass(frozen=True)
class ReserveUpdateResult:
    new_reserves: np.ndarray
    value_before: float
    value_after: float
    arb_cost: float
    # closed-form product evaluation; only filled by apply_trajectory
    closed_form_reserves: np.ndarray | None = None

    def pool(self, weights: WeightVector, block_index: int = 0) -> PoolState:
        return PoolState(self.new_reserves, weights, block_index)


def check_equilibrium(pool: PoolState, prices: PriceVector, rtol: float = EQUILIBRIUM_RTOL) -> None:
    if len(prices) != pool.n:
        raise DimensionMismatch(f"{len(prices)} prices for {pool.n}-token pool")
    quoted = pool.quoted_prices(prices.numeraire_index)
    err = np.max(np.abs(quoted / prices.prices - 1.0))
    if err > rtol:
        raise NotAtEquilibrium(
            f"pool quotes differ from market prices by {err:.3g} (relative), tolerance {rtol}"
        )


def log_step_factor(w_old, w_new) -> float:
    """log prod_j (w_old_j / w_new_j) ** w_new_j; always <= 0 on the simplex."""
    w_old = np.asarray(w_old, dtype=float)
    w_new = np.asarray(w_new, dtype=float)
    return float(np.dot(w_new, np.log(w_old) - np.log(w_new)))


def reserve_update(pool: PoolState, new_weights, prices: PriceVector) -> ReserveUpdateResult:
    """Reserves after moving to ``new_weights`` and being arbitraged back to ``prices``.

    The pool must already quote ``prices`` (within 1e-6 relative).
    """
    new_weights = as_weights(new_weights)
    if len(new_weights) != pool.n:
        raise DimensionMismatch(f"{len(new_weights)} new weights for {pool.n}-token pool")
    check_equilibrium(pool, prices)
    w = pool.weights.weights
    w2 = new_weights.weights
    new_reserves = pool.reserves * (w2 / w) * np.exp(log_step_factor(w, w2))
    before = pool_value(pool, prices)
    after = float(np.dot(prices.prices, new_reserves))
    return ReserveUpdateResult(new_reserves, before, after, before - after)


def trajectory_log_factor(steps) -> float:
    """Sum over consecutive pairs of :func:`log_step_factor`."""
    s = np.asarray(steps, dtype=float)
    return float(np.sum(s[1:] * (np.log(s[:-1]) - np.log(s[1:]))))


def closed_form_final_reserves(reserves, steps) -> np.ndarray:
    """R(t_f) = R(t_0) * w(t_f)/w(t_0) * prod_k prod_j (w_j(t_{k-1}) / w_j(t_k)) ** w_j(t_k)."""
    s = np.asarray(steps, dtype=float)
    return np.asarray(reserves, dtype=float) * (s[-1] / s[0]) * np.exp(trajectory_log_factor(s))


def apply_trajectory(pool: PoolState, traj: Trajectory, prices: PriceVector) -> ReserveUpdateResult:
    """Fold :func:`reserve_update` over the trajectory's consecutive steps.

    The result also carries the closed-form product evaluation in
    ``closed_form_reserves`` for cross-checking.
    """
    if traj.n != pool.n:
        raise DimensionMismatch(f"{traj.n}-token trajectory for {pool.n}-token pool")
    if not np.allclose(traj.steps[0], pool.weights.weights, rtol=0.0, atol=1e-10):
        raise StartMismatch("trajectory does not start at the pool's current weights")
    check_equilibrium(pool, prices)
    before = pool_value(pool, prices)
    reserves = pool.reserves
    steps = traj.steps
    for k in range(1, steps.shape[0]):
        reserves = reserves * (steps[k] / steps[k - 1]) * np.exp(
            log_step_factor(steps[k - 1], steps[k])
        )
    after = float(np.dot(prices.prices, reserves))
    return ReserveUpdateResult(
        reserves, before, after, before - after,
        closed_form_reserves=closed_form_final_reserves(pool.reserves, steps),
    )


def trajectory_value(pool: PoolState, traj: Trajectory, prices: PriceVector) -> float:
    """p . R(t_f) via the closed form (no per-step fold)."""
    return float(np.dot(prices.prices, closed_form_final_reserves(pool.reserves, traj.steps)))


def _log_two_step_ratio(w0, w_mid, wf) -> float:
    # log r = sum_j (w_mid_j - wf_j) * (log w0_j - log w_mid_j)
    return float(np.dot(w_mid - wf, np.log(w0) - np.log(w_mid)))


def two_step_ratio(w0, w_mid, wf, check_range: bool = True) -> float:
    """Ratio of final reserves for ``w0 -> w_mid -> wf`` versus ``w0 -> wf`` directly.

    ``w_mid`` may be any positive vector (it need not be normalised) unless
    ``check_range`` is set, in which case every component must lie between
    the corresponding endpoint components.
    """
    a = np.asarray(w0, dtype=float)
    m = np.asarray(w_mid, dtype=float)
    b = np.asarray(wf, dtype=float)
    if not (a.shape == m.shape == b.shape):
        raise DimensionMismatch("weight vectors differ in length")
    if check_range:
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        bad = np.flatnonzero((m < lo) | (m > hi))
        if bad.size:
            i = int(bad[0])
            raise MidpointOutOfRange(
                f"w_mid[{i}] = {m[i]!r} outside [{lo[i]!r}, {hi[i]!r}]"
            )
    return float(np.exp(_log_two_step_ratio(a, m, b)))


def linear_bisection_ratio(w0, delta_w) -> float:
    """prod_j (1 + dw_j / (2 w0_j)) ** (dw_j / 2): gain from stopping once at the linear midpoint."""
    w0 = as_weights(w0)
    dw = np.asarray(delta_w, dtype=float)
    if dw.shape != w0.weights.shape:
        raise InvalidDelta("delta_w length differs from w0")
    if abs(dw.sum()) > 1e-9:
        raise InvalidDelta(f"delta_w sums to {dw.sum()!r}, expected 0")
    end = w0.weights + dw
    eps = w0.epsilon_bound
    if np.any(end <= eps) or np.any(end >= 1.0 - eps):
        raise InvalidDelta("w0 + delta_w leaves the open simplex")
    half = dw / 2.0
    return float(np.exp(np.dot(half, np.log1p(half / w0.weights))))
