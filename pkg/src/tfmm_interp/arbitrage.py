"""Profit-maximising arbitrage against a G3M pool with a proportional fee on inputs.

The arbitrageur picks a trade vector ``delta`` (positive = tokens paid into the
pool) to maximise ``-p . delta`` subject to the fee-adjusted invariant

    prod_i (R_i + gamma * max(delta_i, 0) + min(delta_i, 0)) ** w_i >= prod_i R_i ** w_i.

Fees stay in the pool, so reserves after the trade are ``R + delta``.

Writing ``y_i`` for the fee-adjusted reserve inside the product, the problem is
convex in ``y`` and its KKT conditions give every ``y_i`` as a function of a
single multiplier ``lam``:

    y_i = lam * w_i / p_i           if that is below R_i   (token leaves the pool)
    y_i = gamma * lam * w_i / p_i   if that is above R_i   (token enters the pool)
    y_i = R_i                       otherwise              (untouched)

``log prod y_i ** w_i`` is increasing in ``lam``, so the binding invariant is
met where a monotone function of ``log lam`` crosses zero. That function is
piecewise linear between the 2N breakpoints ``log(R_i / a_i)`` and
``log(R_i / (gamma * a_i))`` (``a = w / p``), so the root is found exactly by
evaluating it at the sorted breakpoints and interpolating on one segment.
If all tokens are untouched at the root, the pool is inside the no-arb band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatch, PoolState, PriceVector, TFMMError

PROFIT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class FeeParams:
    fee_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.fee_rate < 1.0:
            raise TFMMError(f"fee_rate must be in [0, 1), got {self.fee_rate!r}")

    @property
    def gamma(self) -> float:
        return 1.0 - self.fee_rate


@dataclass(frozen=True)
class ArbOutcome:
    traded: bool
    trade_deltas: np.ndarray
    pool_after: PoolState
    arb_profit: float
    fees_accrued: float


def effective_reserves(reserves, delta, gamma: float) -> np.ndarray:
    """Reserves as seen by the invariant: only ``gamma`` of each input counts."""
    delta = np.asarray(delta, dtype=float)
    return np.asarray(reserves, dtype=float) + gamma * np.maximum(delta, 0.0) + np.minimum(delta, 0.0)


def trade_is_feasible(pool: PoolState, delta, gamma: float, rtol: float = 1e-12) -> bool:
    y = effective_reserves(pool.reserves, delta, gamma)
    if np.any(y <= 0):
        return False
    w = pool.weights.weights
    log_k = np.dot(w, np.log(pool.reserves))
    return float(np.dot(w, np.log(y))) >= log_k - rtol


def _reserves_for(lam: float, r: np.ndarray, a: np.ndarray, gamma: float) -> np.ndarray:
    # a = w / p
    out_target = lam * a
    in_target = gamma * lam * a
    return np.where(out_target < r, out_target, np.where(in_target > r, in_target, r))


def _invariant_gap(log_lam, log_r, log_a, w, log_k, log_gamma) -> np.ndarray:
    """log prod y_i ** w_i - log k at each candidate ``log_lam`` (vectorised)."""
    x = np.asarray(log_lam, dtype=float)[..., None]
    out = x + log_a
    inn = log_gamma + x + log_a
    log_y = np.where(out < log_r, out, np.where(inn > log_r, inn, log_r))
    return log_y @ w - log_k


def _solve_multiplier(log_r, log_a, w, log_k, gamma) -> float:
    log_gamma = np.log(gamma)
    bps = np.sort(np.concatenate([log_r - log_a, log_r - log_a - log_gamma]))
    gaps = _invariant_gap(bps, log_r, log_a, w, log_k, log_gamma)
    # below the first breakpoint every token leaves the pool (slope 1), above the last all enter
    if gaps[0] >= 0:
        return float(bps[0] - gaps[0])
    if gaps[-1] < 0:
        return float(bps[-1] - gaps[-1])
    j = int(np.argmax(gaps >= 0))
    if gaps[j] == 0:
        return float(bps[j])
    x0, x1, g0, g1 = bps[j - 1], bps[j], gaps[j - 1], gaps[j]
    return float(x0 - g0 * (x1 - x0) / (g1 - g0))


def arb_trade(r: np.ndarray, w: np.ndarray, p: np.ndarray, gamma: float):
    """Array-level core of :func:`arb_to_equilibrium`.

    Returns ``(delta, profit, fees)``; ``delta`` is None when no trade clears
    the profit threshold.
    """
    log_r = np.log(r)
    a = w / p
    log_k = float(np.dot(w, log_r))
    log_lam = _solve_multiplier(log_r, np.log(a), w, log_k, gamma)
    y = _reserves_for(np.exp(log_lam), r, a, gamma)
    if gamma == 1.0:
        # every token moves; rescale so the invariant binds exactly
        y = y * np.exp(log_k - float(np.dot(w, np.log(y))))
    moved = y - r
    delta = np.where(moved > 0, moved / gamma, moved)
    profit = -float(np.dot(p, delta))
    if not profit > PROFIT_THRESHOLD * float(np.dot(p, r)):
        return None, 0.0, 0.0
    fees = float(np.dot(p, (1.0 - gamma) * np.maximum(delta, 0.0)))
    return delta, profit, fees


def arb_to_equilibrium(pool: PoolState, prices: PriceVector, fees: FeeParams | None = None) -> ArbOutcome:
    """Execute the single most profitable arbitrage trade, or none inside the no-arb band."""
    fees = fees or FeeParams()
    if len(prices) != pool.n:
        raise DimensionMismatch(f"{len(prices)} prices for {pool.n}-token pool")
    r = pool.reserves
    delta, profit, fee_value = arb_trade(r, pool.weights.weights, prices.prices, fees.gamma)
    if delta is None:
        return ArbOutcome(False, np.zeros_like(r), pool, 0.0, 0.0)
    after = PoolState(r + delta, pool.weights, pool.block_index)
    return ArbOutcome(True, delta, after, profit, fee_value)
