"""Weight-interpolation trajectories for dynamic-weight geometric mean market makers."""

from .arbitrage import ArbOutcome, FeeParams, arb_to_equilibrium
from .backtest import (
    BacktestReport,
    StrategyConfig,
    StrategyKind,
    channel_targets,
    compare_schemes,
    momentum_targets,
    run_backtest,
)
from .core import (
    PoolState,
    PriceVector,
    Scheme,
    TFMMError,
    Trajectory,
    WeightVector,
    pool_value,
    quoted_price,
    validate_weights,
)
from .optimizer import (
    OptimizerConfig,
    OptimizerResult,
    optimize_trajectory,
    trajectory_objective_gradient,
)
from .prices import PriceSeries, read_price_csv, synthetic_series
from .reserves import (
    ReserveUpdateResult,
    apply_trajectory,
    linear_bisection_ratio,
    reserve_update,
    two_step_ratio,
)
from .schemes import (
    InterpolationRequest,
    approx_optimal_trajectory,
    d_r_d_wtilde,
    geometric_trajectory,
    linear_trajectory,
    optimal_intermediate,
)
from .special import lambert_w0

__version__ = "0.1.0"
