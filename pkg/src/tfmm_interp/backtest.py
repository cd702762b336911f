"""Block-level simulation of a dynamic-weight pool under a target-weight strategy.

Per block ``t = 1 .. T-1``:

1. advance the active weight trajectory by one step (if any),
2. move market prices to ``p(t)``,
3. let one arbitrageur trade (fee-aware),
4. on rebalance blocks (``t >= lookback`` and ``(t - lookback) % cadence == 0``)
   compute new targets from prices up to ``t`` and build a trajectory of
   ``cadence`` steps from the current weights; its first step lands at ``t+1``.

A trajectory's final step therefore coincides with the next rebalance block.
When prices only change on rebalance blocks, all schemes share the weights in
force at every price move, which makes zero-fee runs directly comparable.

Strategies are fixed-parameter stand-ins: an EWMA of log-price increments for
momentum, and position within the rolling log-price channel for channel
following. Both tilt the uniform portfolio and project onto the capped simplex.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .arbitrage import FeeParams, arb_trade
from .core import (
    ConfigMismatch,
    InsufficientHistory,
    PoolState,
    Scheme,
    TFMMError,
    WeightVector,
)
from .prices import PriceSeries
from .schemes import InterpolationRequest, make_trajectory

log = logging.getLogger(__name__)


class StrategyKind(str, Enum):
    MOMENTUM = "momentum"
    CHANNEL = "channel"
    # holds uniform weights; a control for "nothing happens" runs
    UNIFORM = "uniform"


@dataclass(frozen=True)
class StrategyConfig:
    kind: StrategyKind = StrategyKind.MOMENTUM
    lookback_blocks: int = 20
    aggressiveness: float = 20.0
    rebalance_cadence_blocks: int = 10
    weight_floor: float = 0.05
    weight_cap: float = 0.9

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.lookback_blocks < 1:
            raise TFMMError("lookback_blocks must be >= 1")
        if self.rebalance_cadence_blocks < 1:
            raise TFMMError("rebalance_cadence_blocks must be >= 1")
        if not 0 < self.weight_floor < self.weight_cap < 1:
            raise TFMMError("need 0 < weight_floor < weight_cap < 1")

    def check_tokens(self, n: int) -> None:
        if not self.weight_floor < 1.0 / n <= self.weight_cap:
            raise ConfigMismatch(
                f"weight bounds [{self.weight_floor}, {self.weight_cap}] must bracket 1/{n}"
            )

    @property
    def label(self) -> str:
        return (
            f"{self.kind.value}(lookback={self.lookback_blocks},"
            f"aggr={self.aggressiveness:g},cadence={self.rebalance_cadence_blocks})"
        )


@dataclass
class BacktestReport:
    timestamps: np.ndarray
    per_block_value: np.ndarray
    fees_cum: np.ndarray
    arb_cost_cum: np.ndarray
    weights: np.ndarray
    scheme_label: Scheme
    strategy_label: str
    fee_rate: float
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def final_return(self) -> float:
        return float(self.per_block_value[-1] / self.per_block_value[0] - 1.0)

    @property
    def final_value(self) -> float:
        return float(self.per_block_value[-1])

    @property
    def fees_total(self) -> float:
        return float(self.fees_cum[-1])

    @property
    def arb_cost_total(self) -> float:
        return float(self.arb_cost_cum[-1])

    def summary(self) -> dict:
        return {
            "scheme": self.scheme_label.value,
            "strategy": self.strategy_label,
            "fee_rate": self.fee_rate,
            "seed": self.seed,
            "final_return": self.final_return,
            "final_value": self.final_value,
            "fees_total": self.fees_total,
            "arb_cost_total": self.arb_cost_total,
            "blocks": int(len(self.per_block_value)),
        }


def project_capped_simplex(v, lower: float, upper: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto {x : sum x = 1, lower <= x_i <= upper}."""
    v = np.asarray(v, dtype=float)
    n = v.shape[0]
    if not lower * n <= 1.0 <= upper * n:
        raise TFMMError("capped simplex is empty for these bounds")

    # mass(tau) = sum clip(v - tau, lower, upper) is piecewise linear and
    # non-increasing, with kinks at v_i - upper and v_i - lower
    bps = np.sort(np.concatenate([v - upper, v - lower]))
    mass = np.clip(v[None, :] - bps[:, None], lower, upper).sum(axis=1)
    j = int(np.argmax(mass <= 1.0))
    if mass[j] == 1.0 or j == 0:
        tau = bps[j]
    else:
        t0, t1, m0, m1 = bps[j - 1], bps[j], mass[j - 1], mass[j]
        tau = t0 + (m0 - 1.0) * (t1 - t0) / (m0 - m1)
    x = np.clip(v - tau, lower, upper)
    free = (x > lower) & (x < upper)
    if free.any():
        # re-solve on the active set so the sum is exact to rounding
        tau = (v[free].sum() + x[~free].sum() - 1.0) / free.sum()
        x[free] = v[free] - tau
    return x


def _window_logs(history, cfg: StrategyConfig) -> np.ndarray:
    px = history.prices if isinstance(history, PriceSeries) else np.asarray(history, dtype=float)
    if px.ndim != 2 or px.shape[0] < cfg.lookback_blocks + 1:
        have = px.shape[0] if px.ndim == 2 else 0
        raise InsufficientHistory(
            f"need {cfg.lookback_blocks + 1} price rows for lookback {cfg.lookback_blocks}, got {have}"
        )
    cfg.check_tokens(px.shape[1])
    return np.log(px[-(cfg.lookback_blocks + 1):])


def _tilt_to_weights(signal: np.ndarray, cfg: StrategyConfig) -> WeightVector:
    n = signal.shape[0]
    raw = 1.0 / n + cfg.aggressiveness * (signal - signal.mean())
    w = project_capped_simplex(raw, cfg.weight_floor, cfg.weight_cap)
    return WeightVector(w / w.sum())


def momentum_targets(history, cfg: StrategyConfig) -> WeightVector:
    """Tilt toward tokens whose log price has been rising.

    The gradient estimate is an exponentially weighted mean of the last
    ``lookback_blocks`` log-price increments, decay ``1 - 2/(lookback+1)``.
    """
    logs = _window_logs(history, cfg)
    incs = np.diff(logs, axis=0)
    lam = 1.0 - 2.0 / (cfg.lookback_blocks + 1.0)
    ages = np.arange(incs.shape[0] - 1, -1, -1, dtype=float)
    wts = lam**ages
    grad = (wts[:, None] * incs).sum(axis=0) / wts.sum()
    return _tilt_to_weights(grad, cfg)


def channel_targets(history, cfg: StrategyConfig) -> WeightVector:
    """Tilt toward tokens trading near the top of their rolling log-price channel.

    Signal is ``2 * (x - min) / (max - min) - 1`` over the lookback window, in
    [-1, 1]; a flat channel gives 0. Positive aggressiveness follows breakouts.
    """
    logs = _window_logs(history, cfg)
    lo = logs.min(axis=0)
    hi = logs.max(axis=0)
    width = hi - lo
    pos = np.zeros(logs.shape[1])
    live = width > 0
    pos[live] = 2.0 * (logs[-1, live] - lo[live]) / width[live] - 1.0
    return _tilt_to_weights(pos, cfg)


def strategy_targets(history, cfg: StrategyConfig) -> WeightVector:
    if cfg.kind is StrategyKind.MOMENTUM:
        return momentum_targets(history, cfg)
    if cfg.kind is StrategyKind.CHANNEL:
        return channel_targets(history, cfg)
    px = history.prices if isinstance(history, PriceSeries) else np.asarray(history)
    return WeightVector.uniform(px.shape[1])


def initial_pool(series: PriceSeries, value: float = 1_000_000.0, weights=None) -> PoolState:
    """Equilibrium pool worth ``value`` at the first block's prices (uniform weights by default)."""
    w = WeightVector.uniform(series.n) if weights is None else weights
    if not isinstance(w, WeightVector):
        w = WeightVector.from_raw(w)
    return PoolState.at_equilibrium(value, w, series.at(0))


def run_backtest(
    series: PriceSeries,
    strategy: StrategyConfig,
    scheme,
    fees: FeeParams | None = None,
    pool: PoolState | None = None,
    seed: int | None = None,
) -> BacktestReport:
    """Simulate one pool over ``series``; see the module docstring for the block order."""
    scheme = Scheme.parse(scheme)
    fees = fees or FeeParams()
    pool = pool if pool is not None else initial_pool(series)
    if pool.n != series.n:
        raise ConfigMismatch(f"{pool.n}-token pool for {series.n}-token price series")
    strategy.check_tokens(series.n)
    look = strategy.lookback_blocks
    cadence = strategy.rebalance_cadence_blocks
    T = len(series)
    if T < look + cadence + 1:
        raise InsufficientHistory(
            f"{T} blocks is too short for lookback {look} plus one cadence of {cadence}"
        )
    eps = pool.weights.epsilon_bound

    prices = series.prices
    values = np.empty(T)
    fees_cum = np.zeros(T)
    arb_cum = np.zeros(T)
    weights = np.empty((T, series.n))

    reserves = pool.reserves
    w = pool.weights.weights
    gamma = fees.gamma
    values[0] = float(np.dot(prices[0], reserves))
    weights[0] = w
    steps = None
    k = 0
    fee_total = 0.0
    arb_total = 0.0
    for t in range(1, T):
        if steps is not None:
            k += 1
            w = steps[k]
            if k == steps.shape[0] - 1:
                steps = None
        p = prices[t]
        delta, profit, fee_value = arb_trade(reserves, w, p, gamma)
        if delta is not None:
            reserves = reserves + delta
            fee_total += fee_value
            arb_total += profit
        values[t] = float(np.dot(p, reserves))
        fees_cum[t] = fee_total
        arb_cum[t] = arb_total
        weights[t] = w

        if t >= look and (t - look) % cadence == 0:
            target = strategy_targets(prices[t - look : t + 1], strategy)
            req = InterpolationRequest(
                WeightVector(w, eps), WeightVector(target.weights, eps), cadence
            )
            steps = make_trajectory(req, scheme).steps
            k = 0

    return BacktestReport(
        timestamps=series.timestamps,
        per_block_value=values,
        fees_cum=fees_cum,
        arb_cost_cum=arb_cum,
        weights=weights,
        scheme_label=scheme,
        strategy_label=strategy.label,
        fee_rate=fees.fee_rate,
        seed=seed if seed is not None else series.metadata.get("seed"),
    )


def _run_cell(args):
    series, strategy, scheme, fee, pool, seed = args
    return run_backtest(series, strategy, scheme, FeeParams(fee), pool, seed)


def compare_schemes(
    series: PriceSeries,
    strategy: StrategyConfig,
    fees_grid: Sequence[float],
    schemes: Sequence,
    pool: PoolState | None = None,
    seed: int | None = None,
    workers: int = 1,
) -> list[BacktestReport]:
    """Run every (scheme, fee) cell on the same prices; scheme-major order.

    With ``workers > 1`` cells run in separate processes; results are identical
    to the sequential run.
    """
    schemes = [Scheme.parse(s) for s in schemes]
    fees_grid = [float(f) for f in fees_grid]
    for f in fees_grid:
        FeeParams(f)
    pool = pool if pool is not None else initial_pool(series)
    cells = [(series, strategy, s, f, pool, seed) for s in schemes for f in fees_grid]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_cell, cells))
    return [_run_cell(c) for c in cells]


def _seed_ratios(args):
    from .prices import synthetic_series

    seed, strategy, fees_grid, numerator, denominator, num_blocks, num_tokens, drift, volatility = args
    series = synthetic_series(num_blocks, num_tokens, seed, drift, volatility)
    reports = compare_schemes(series, strategy, fees_grid, [numerator, denominator], seed=seed)
    half = len(fees_grid)
    return [reports[i].final_value / reports[half + i].final_value for i in range(half)]


def paired_ratios(
    seeds: Sequence[int],
    strategy: StrategyConfig,
    fees_grid: Sequence[float],
    numerator=Scheme.APPROX_OPTIMAL,
    denominator=Scheme.LINEAR,
    num_blocks: int = 500,
    num_tokens: int = 3,
    drift: float = 0.0,
    volatility: float = 0.002,
    workers: int = 1,
) -> dict[float, np.ndarray]:
    """Final-value ratio numerator/denominator per seed on synthetic random walks, by fee.

    With ``workers > 1`` seeds are spread over processes; results do not change.
    """
    fees_grid = [float(f) for f in fees_grid]
    cells = [
        (seed, strategy, fees_grid, Scheme.parse(numerator), Scheme.parse(denominator),
         num_blocks, num_tokens, drift, volatility)
        for seed in seeds
    ]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_seed_ratios, cells))
    else:
        rows = [_seed_ratios(c) for c in cells]
    table = np.array(rows, dtype=float).reshape(len(cells), len(fees_grid))
    return {f: table[:, i].copy() for i, f in enumerate(fees_grid)}


__all__ = [
    "BacktestReport",
    "StrategyConfig",
    "StrategyKind",
    "channel_targets",
    "compare_schemes",
    "initial_pool",
    "momentum_targets",
    "paired_ratios",
    "project_capped_simplex",
    "run_backtest",
]
