"""Market price histories: container, CSV I/O and a seeded synthetic generator.

Synthetic paths use a fully specified generator so another implementation can
reproduce them bit for bit:

* 64-bit LCG, ``s <- (6364136223846793005 * s + 1442695040888963407) mod 2**64``,
  starting from ``s = seed`` and advanced once before each draw.
* Uniform draw: ``u = ((s >> 11) + 0.5) / 2**53``, which lies in (0, 1).
* Standard normals: Box-Muller on consecutive uniform pairs ``(u1, u2)``,
  emitting ``sqrt(-2 ln u1) * cos(2 pi u2)`` then ``sqrt(-2 ln u1) * sin(2 pi u2)``.
* Normals are consumed block by block, token by token, skipping the numeraire.
* Log-price step: ``log p += (drift - vol**2 / 2) + vol * z``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import PriceVector, TFMMError

LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK = (1 << 64) - 1


class MalformedCSV(TFMMError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class Lcg64:
    """The 64-bit linear congruential generator described in the module docstring."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK
        self._spare: float | None = None

    def next_u64(self) -> int:
        self.state = (LCG_MULTIPLIER * self.state + LCG_INCREMENT) & _MASK
        return self.state

    def uniform(self) -> float:
        return ((self.next_u64() >> 11) + 0.5) / 9007199254740992.0

    def normal(self) -> float:
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = self.uniform()
        u2 = self.uniform()
        rad = math.sqrt(-2.0 * math.log(u1))
        ang = 2.0 * math.pi * u2
        self._spare = rad * math.sin(ang)
        return rad * math.cos(ang)

    def normals(self, n: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(n)])


@dataclass(frozen=True)
class PriceSeries:
    timestamps: np.ndarray
    prices: np.ndarray
    symbols: tuple = ()
    numeraire_index: int = 0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=np.int64)
        px = np.array(self.prices, dtype=float)
        ts.setflags(write=False)
        px.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prices", px)
        if px.ndim != 2 or px.shape[1] < 2:
            raise TFMMError("prices must be a T x N matrix with N >= 2")
        if ts.shape != (px.shape[0],):
            raise TFMMError("one timestamp per price row required")
        if np.any(np.diff(ts) <= 0):
            raise TFMMError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(px)) or np.any(px <= 0):
            raise TFMMError("prices must be finite and strictly positive")
        if not 0 <= self.numeraire_index < px.shape[1]:
            raise TFMMError("numeraire index out of range")
        if np.any(px[:, self.numeraire_index] != 1.0):
            raise TFMMError("numeraire column must be exactly 1")
        if not self.symbols:
            object.__setattr__(self, "symbols", tuple(f"T{i}" for i in range(px.shape[1])))
        elif len(self.symbols) != px.shape[1]:
            raise TFMMError("one symbol per price column required")

    def __len__(self) -> int:
        return self.prices.shape[0]

    @property
    def n(self) -> int:
        return self.prices.shape[1]

    def at(self, t: int) -> PriceVector:
        return PriceVector(self.prices[t], self.numeraire_index)

    def window(self, start: int, stop: int) -> "PriceSeries":
        return PriceSeries(
            self.timestamps[start:stop], self.prices[start:stop], self.symbols, self.numeraire_index
        )


def synthetic_series(
    num_blocks: int,
    num_tokens: int = 3,
    seed: int = 0,
    drift: float | Sequence[float] = 0.0,
    volatility: float | Sequence[float] = 0.01,
    initial_prices: Sequence[float] | None = None,
    numeraire_index: int = 0,
) -> PriceSeries:
    """Geometric random walk per non-numeraire token; drift and volatility are per block."""
    if num_blocks < 1 or num_tokens < 2:
        raise TFMMError("need at least one block and two tokens")
    mu = np.broadcast_to(np.asarray(drift, dtype=float), (num_tokens,))
    sig = np.broadcast_to(np.asarray(volatility, dtype=float), (num_tokens,))
    if np.any(sig < 0):
        raise TFMMError("volatility must be non-negative")
    start = np.ones(num_tokens) if initial_prices is None else np.asarray(initial_prices, dtype=float)
    if start.shape != (num_tokens,) or np.any(start <= 0):
        raise TFMMError("initial_prices must be positive, one per token")
    rng = Lcg64(seed)
    risky = [i for i in range(num_tokens) if i != numeraire_index]
    logp = np.log(start / start[numeraire_index])
    out = np.empty((num_blocks, num_tokens))
    out[0] = np.exp(logp)
    for t in range(1, num_blocks):
        for i in risky:
            logp[i] += (mu[i] - 0.5 * sig[i] ** 2) + sig[i] * rng.normal()
        out[t] = np.exp(logp)
    out[:, numeraire_index] = 1.0
    return PriceSeries(
        np.arange(num_blocks), out, numeraire_index=numeraire_index,
        metadata={"seed": int(seed), "generator": "lcg64-box-muller"},
    )


def constant_series(num_blocks: int, prices: Sequence[float], numeraire_index: int = 0) -> PriceSeries:
    p = PriceVector.normalised(prices, numeraire_index).prices
    return PriceSeries(np.arange(num_blocks), np.tile(p, (num_blocks, 1)), numeraire_index=numeraire_index)


def read_price_csv(path, numeraire: str | None = None) -> PriceSeries:
    """Read ``timestamp,<sym1>,...,<symN>`` rows.

    If ``numeraire`` names a column, every price is divided by it; if it is
    given but absent, a constant-1 column is prepended under that name. With
    no numeraire the first price column serves as the numeraire.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCSV("empty file", 1) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "timestamp":
            raise MalformedCSV("header must be 'timestamp,<symbol>,...'", 1)
        symbols = header[1:]
        ts, rows = [], []
        prev = None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise MalformedCSV(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                stamp = int(float(row[0]))
                vals = [float(c) for c in row[1:]]
            except ValueError as exc:
                raise MalformedCSV(str(exc), lineno) from None
            if not all(math.isfinite(v) and v > 0 for v in vals):
                raise MalformedCSV("prices must be positive and finite", lineno)
            if prev is not None and stamp <= prev:
                raise MalformedCSV("timestamps must be strictly increasing", lineno)
            prev = stamp
            ts.append(stamp)
            rows.append(vals)
    if not rows:
        raise MalformedCSV("no price rows", 2)
    px = np.array(rows)
    if numeraire is None:
        num_idx = 0
    elif numeraire in symbols:
        num_idx = symbols.index(numeraire)
    else:
        symbols = [numeraire] + symbols
        px = np.hstack([np.ones((px.shape[0], 1)), px])
        num_idx = 0
    px = px / px[:, [num_idx]]
    px[:, num_idx] = 1.0
    if px.shape[1] < 2:
        raise MalformedCSV("need at least two tokens", 1)
    return PriceSeries(np.array(ts), px, tuple(symbols), num_idx)


def write_price_csv(series: PriceSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *series.symbols])
        for t, row in zip(series.timestamps, series.prices):
            w.writerow([int(t), *(repr(float(v)) for v in row)])
