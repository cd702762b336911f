"""Command-line front end.

Commands: ``trajectory``, ``optimize``, ``backtest``, ``compare``.
Settings come from an optional JSON ``--config`` file, overridden by flags;
the effective configuration is written next to the outputs as
``config.json`` and can be fed back through ``--config``.

Exit codes: 0 ok, 2 input error, 3 optimizer did not converge.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import output
from .backtest import StrategyConfig, compare_schemes, initial_pool, paired_ratios
from .core import PoolState, PriceVector, Scheme, TFMMError, validate_weights
from .optimizer import OptimizerConfig, optimize_trajectory
from .prices import read_price_csv, synthetic_series
from .reserves import trajectory_value
from .schemes import InterpolationRequest, make_trajectory, one_step_trajectory

log = logging.getLogger("tfmm_interp")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3

EXAMPLE_START = [0.05, 0.55, 0.4]
EXAMPLE_END = [0.4, 0.5, 0.1]


@dataclass
class RunConfig:
    out_dir: str = "out"
    seed: int = 0
    # trajectory / optimize
    steps: int = 1000
    start: list = field(default_factory=lambda: list(EXAMPLE_START))
    end: list = field(default_factory=lambda: list(EXAMPLE_END))
    epsilon: float = 1e-6
    schemes: list = field(default_factory=lambda: ["approx_optimal", "linear", "geometric"])
    max_iterations: int = 5000
    gradient_tolerance: float | None = None
    method: str = "newton"
    allow_nonconverged: bool = False
    # backtest / compare
    fees: list = field(default_factory=lambda: [0.0])
    prices: str | None = None
    numeraire: str | None = None
    synthetic: bool = False
    blocks: int = 300
    tokens: int = 3
    drift: float = 0.0
    volatility: float = 0.002
    strategy: str = "momentum"
    lookback: int = 20
    aggressiveness: float = 1000.0
    cadence: int = 5
    weight_floor: float = 0.05
    weight_cap: float = 0.9
    initial_value: float = 1_000_000.0
    seeds: int = 100
    workers: int = 1

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise TFMMError("config file must hold a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise TFMMError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def strategy_config(self) -> StrategyConfig:
        return StrategyConfig(
            kind=self.strategy,
            lookback_blocks=self.lookback,
            aggressiveness=self.aggressiveness,
            rebalance_cadence_blocks=self.cadence,
            weight_floor=self.weight_floor,
            weight_cap=self.weight_cap,
        )

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            max_iterations=self.max_iterations,
            gradient_tolerance=self.gradient_tolerance,
            epsilon_bound=self.epsilon,
            seed=self.seed,
            method=self.method,
        )

    def request(self) -> InterpolationRequest:
        try:
            w0 = validate_weights(self.start, self.epsilon)
            wf = validate_weights(self.end, self.epsilon)
        except TFMMError as exc:
            raise TFMMError(f"weight vector invalid ({type(exc).__name__}): {exc}") from None
        return InterpolationRequest(w0, wf, self.steps)

    def scheme_list(self) -> list[Scheme]:
        return [Scheme.parse(s) for s in self.schemes]


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _words(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# flag -> RunConfig field; every flag defaults to None so only explicit flags override the file
_FLAGS = [
    ("--out-dir", "out_dir", str, "output directory (default out)"),
    ("--seed", "seed", int, "random seed; first seed for compare (default 0)"),
    ("--steps", "steps", int, "number of interpolation steps f (default 1000)"),
    ("--start", "start", _floats, "start weights, comma-separated"),
    ("--end", "end", _floats, "end weights, comma-separated"),
    ("--epsilon", "epsilon", float, "minimum weight bound (default 1e-6)"),
    ("--schemes", "schemes", _words, "comma-separated schemes: one_step, linear, geometric, approx_optimal"),
    ("--fees", "fees", _floats, "comma-separated fee rates (default 0)"),
    ("--prices", "prices", str, "price CSV: timestamp,<sym1>,..."),
    ("--numeraire", "numeraire", str, "numeraire symbol; prepended as a constant-1 column if absent"),
    ("--blocks", "blocks", int, "synthetic series length (default 300)"),
    ("--tokens", "tokens", int, "synthetic token count (default 3)"),
    ("--drift", "drift", float, "synthetic per-block log drift (default 0)"),
    ("--volatility", "volatility", float, "synthetic per-block volatility (default 0.002)"),
    ("--strategy", "strategy", str, "momentum, channel or uniform (default momentum)"),
    ("--lookback", "lookback", int, "strategy lookback in blocks (default 20)"),
    ("--aggressiveness", "aggressiveness", float, "strategy tilt multiplier (default 1000)"),
    ("--cadence", "cadence", int, "blocks between rebalances (default 5)"),
    ("--weight-floor", "weight_floor", float, "minimum target weight (default 0.05)"),
    ("--weight-cap", "weight_cap", float, "maximum target weight (default 0.9)"),
    ("--initial-value", "initial_value", float, "initial pool value in numeraire (default 1e6)"),
    ("--seeds", "seeds", int, "number of seeds for compare (default 100)"),
    ("--workers", "workers", int, "worker processes (default 1)"),
    ("--max-iterations", "max_iterations", int, "optimizer iteration cap (default 5000)"),
    ("--gradient-tolerance", "gradient_tolerance", float, "optimizer gradient tolerance (default 1e-10 x pool value)"),
    ("--method", "method", str, "optimizer: newton or softmax (default newton)"),
]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tfmm", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "trajectory": "write linear / geometric / approx-optimal weight trajectories",
        "optimize": "numerically optimal trajectory and deviations from the cheap schemes",
        "backtest": "simulate a pool over prices for every scheme x fee",
        "compare": "paired scheme comparison over many synthetic seeds",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="JSON config file; flags override its values")
        for flag, dest, typ, text in _FLAGS:
            p.add_argument(flag, dest=dest, type=typ, default=None, help=text)
        p.add_argument("--synthetic", dest="synthetic", action="store_const", const=True, default=None,
                       help="use the seeded synthetic random walk instead of --prices")
        p.add_argument(
            "--allow-nonconverged", dest="allow_nonconverged", action="store_const", const=True, default=None,
            help="exit 0 even if the optimizer does not converge",
        )
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for f in dataclasses.fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    return cfg


def _setup_logging() -> None:
    level = os.environ.get("TFMM_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def cmd_trajectory(cfg: RunConfig) -> int:
    req = cfg.request()
    schemes = cfg.scheme_list()
    if Scheme.NUMERICAL_OPTIMAL in schemes:
        raise TFMMError("use the optimize command for the numerically optimal trajectory")
    trajs = [make_trajectory(req, s) for s in schemes]
    out = Path(cfg.out_dir)
    for i, traj in enumerate(trajs):
        tag = traj.scheme_label.value
        output.write_trajectory(out / f"trajectory_{tag}.csv", traj)
        output.write_deltas(out / f"deltas_{tag}.csv", traj)
        if i == 0:
            output.write_trajectory(out / "trajectory.csv", traj)
            output.write_deltas(out / "deltas.csv", traj)
    output.write_json(out / "config.json", cfg.to_dict())
    return EXIT_OK


def cmd_optimize(cfg: RunConfig) -> int:
    req = cfg.request()
    prices = PriceVector.ones(len(req.w_start))
    pool = PoolState.at_equilibrium(1.0, req.w_start, prices)
    res = optimize_trajectory(req, pool, prices, cfg.optimizer_config())
    opt = res.trajectory
    lin = make_trajectory(req, Scheme.LINEAR)
    approx = make_trajectory(req, Scheme.APPROX_OPTIMAL)
    values = {
        "one_step": trajectory_value(pool, one_step_trajectory(req), prices),
        "linear": trajectory_value(pool, lin, prices),
        "approx_optimal": trajectory_value(pool, approx, prices),
        "numerical_optimal": res.final_value,
    }
    gain = values["numerical_optimal"] - values["linear"]
    capture = (values["approx_optimal"] - values["linear"]) / gain if gain > 0 else None
    out = Path(cfg.out_dir)
    output.write_trajectory(out / "trajectory.csv", opt)
    output.write_deltas(out / "deltas.csv", opt)
    output.write_difference(out / "deviation_linear.csv", opt.steps, lin.steps)
    output.write_difference(out / "deviation_approx.csv", opt.steps, approx.steps)
    summary = {
        "iterations": res.iterations_used,
        "converged": res.converged,
        "final_value": res.final_value,
        "gradient_norm": res.gradient_norm,
        "values": values,
        "value_capture": capture,
        "max_abs_deviation_linear": float(np.max(np.abs(opt.steps - lin.steps))),
        "max_abs_deviation_approx": float(np.max(np.abs(opt.steps - approx.steps))),
        "objective_history": res.objective_history,
    }
    output.write_json(out / "optimize.json", summary)
    output.write_json(out / "config.json", cfg.to_dict())
    if not res.converged and not cfg.allow_nonconverged:
        print(
            f"optimizer did not converge after {res.iterations_used} iterations "
            f"(gradient norm {res.gradient_norm:.3g}); pass --allow-nonconverged to accept",
            file=sys.stderr,
        )
        return EXIT_NONCONVERGED
    return EXIT_OK


def _load_series(cfg: RunConfig):
    if cfg.prices and cfg.synthetic:
        raise TFMMError("give either --prices or --synthetic, not both")
    if cfg.prices:
        return read_price_csv(cfg.prices, cfg.numeraire)
    if cfg.synthetic:
        return synthetic_series(cfg.blocks, cfg.tokens, cfg.seed, cfg.drift, cfg.volatility)
    raise TFMMError("need --prices <csv> or --synthetic")


def _fee_tag(fee: float) -> str:
    return f"{fee:g}"


def cmd_backtest(cfg: RunConfig) -> int:
    series = _load_series(cfg)
    strategy = cfg.strategy_config()
    schemes = cfg.scheme_list()
    pool = initial_pool(series, cfg.initial_value)
    reports = compare_schemes(series, strategy, cfg.fees, schemes, pool, seed=cfg.seed, workers=cfg.workers)
    out = Path(cfg.out_dir)
    runs = []
    for rep in reports:
        name = f"report_{rep.scheme_label.value}_fee{_fee_tag(rep.fee_rate)}.csv"
        output.write_report(out / name, rep)
        runs.append({**rep.summary(), "file": name})
    output.write_json(
        out / "summary.json",
        {"runs": runs, "symbols": list(series.symbols), "blocks": len(series), "seed": cfg.seed},
    )
    output.write_json(out / "config.json", cfg.to_dict())
    return EXIT_OK


def cmd_compare(cfg: RunConfig) -> int:
    schemes = cfg.scheme_list()
    if len(schemes) < 2:
        raise TFMMError("compare needs two schemes: numerator,denominator")
    num, den = schemes[:2]
    seeds = list(range(cfg.seed, cfg.seed + cfg.seeds))
    ratios = paired_ratios(
        seeds, cfg.strategy_config(), cfg.fees, num, den,
        num_blocks=cfg.blocks, num_tokens=cfg.tokens, drift=cfg.drift,
        volatility=cfg.volatility, workers=cfg.workers,
    )
    out = Path(cfg.out_dir)
    rows = [(s, fee, r[i]) for fee, r in ratios.items() for i, s in enumerate(seeds)]
    output.write_csv(out / "paired_ratios.csv", ["seed", "fee_rate", "ratio"], rows)
    summary = {
        "numerator": num.value,
        "denominator": den.value,
        "seeds": len(seeds),
        "by_fee": [
            {
                "fee_rate": fee,
                "fraction_ge_1": float(np.mean(r >= 1.0)),
                "median_ratio": float(np.median(r)),
                "min_ratio": float(r.min()),
                "max_ratio": float(r.max()),
            }
            for fee, r in ratios.items()
        ],
    }
    output.write_json(out / "compare.json", summary)
    output.write_json(out / "config.json", cfg.to_dict())
    return EXIT_OK


COMMANDS = {
    "trajectory": cmd_trajectory,
    "optimize": cmd_optimize,
    "backtest": cmd_backtest,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (ValueError, OSError, TypeError) as exc:
        print(f"tfmm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
