"""
Value types shared by every other module: simplex weight vectors, pool state,
numeraire-normalised prices and weight trajectories.

All types are frozen dataclasses wrapping read-only float64 arrays, so they can
be shared between threads without copying.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, Union

import numpy as np

DEFAULT_EPSILON = 1e-6
INPUT_SUM_TOL = 1e-9
INTERNAL_SUM_TOL = 1e-12


class TFMMError(ValueError):
    """Base class for input and precondition errors raised by this package."""


class SumNotOne(TFMMError):
    pass


class OutOfBounds(TFMMError):
    pass


class BadLength(TFMMError):
    pass


class IndexOutOfRange(TFMMError):
    pass


class DimensionMismatch(TFMMError):
    pass


class NotAtEquilibrium(TFMMError):
    pass


class StartMismatch(TFMMError):
    pass


class MidpointOutOfRange(TFMMError):
    pass


class InvalidDelta(TFMMError):
    pass


class DomainError(TFMMError):
    pass


class InsufficientHistory(TFMMError):
    pass


class ConfigMismatch(TFMMError):
    pass


class DidNotConverge(TFMMError):
    pass


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class Scheme(str, Enum):
    """Weight interpolation schemes."""

    ONE_STEP = "one_step"
    LINEAR = "linear"
    GEOMETRIC = "geometric"
    APPROX_OPTIMAL = "approx_optimal"
    NUMERICAL_OPTIMAL = "numerical_optimal"

    @classmethod
    def parse(cls, label: Union[str, "Scheme"]) -> "Scheme":
        if isinstance(label, Scheme):
            return label
        key = label.strip().lower().replace("-", "_")
        aliases = {
            "onestep": cls.ONE_STEP,
            "one_step": cls.ONE_STEP,
            "step": cls.ONE_STEP,
            "linear": cls.LINEAR,
            "am": cls.LINEAR,
            "geometric": cls.GEOMETRIC,
            "gm": cls.GEOMETRIC,
            "approx": cls.APPROX_OPTIMAL,
            "approx_optimal": cls.APPROX_OPTIMAL,
            "approxoptimal": cls.APPROX_OPTIMAL,
            "optimal": cls.NUMERICAL_OPTIMAL,
            "numerical_optimal": cls.NUMERICAL_OPTIMAL,
            "numericaloptimal": cls.NUMERICAL_OPTIMAL,
        }
        try:
            return aliases[key]
        except KeyError:
            raise TFMMError(f"unknown interpolation scheme {label!r}") from None


@dataclass(frozen=True)
class WeightVector:
    """A point on the open probability simplex.

    Construct through :func:`validate_weights` for user input; the constructor
    itself applies the strict internal tolerance.
    """

    weights: np.ndarray
    epsilon_bound: float = DEFAULT_EPSILON

    def __post_init__(self):
        w = _frozen(self.weights)
        object.__setattr__(self, "weights", w)
        _check_weights(w, self.epsilon_bound, INTERNAL_SUM_TOL)

    def __len__(self) -> int:
        return self.weights.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightVector):
            return NotImplemented
        return self.epsilon_bound == other.epsilon_bound and np.array_equal(
            self.weights, other.weights
        )

    def __hash__(self) -> int:
        return hash((self.weights.tobytes(), self.epsilon_bound))

    @property
    def n(self) -> int:
        return len(self)

    def allclose(self, other, atol: float = 1e-10) -> bool:
        return np.allclose(self.weights, np.asarray(other, dtype=float), rtol=0.0, atol=atol)

    @classmethod
    def from_raw(cls, values, epsilon_bound: float = DEFAULT_EPSILON) -> "WeightVector":
        """Build from a vector already known to lie on the simplex up to rounding.

        The vector is renormalised so the stored sum meets the internal
        tolerance; use :func:`validate_weights` for untrusted input.
        """
        w = np.asarray(values, dtype=float)
        s = w.sum()
        if abs(s - 1.0) > INPUT_SUM_TOL:
            raise SumNotOne(f"weights sum to {s!r}, expected 1 within {INPUT_SUM_TOL}")
        return cls(w / s, epsilon_bound)

    @classmethod
    def uniform(cls, n: int, epsilon_bound: float = DEFAULT_EPSILON) -> "WeightVector":
        return cls(np.full(n, 1.0 / n), epsilon_bound)


def _check_weights(w: np.ndarray, eps: float, sum_tol: float) -> None:
    if w.ndim != 1:
        raise BadLength("weights must be a one-dimensional vector")
    if w.shape[0] < 2:
        raise BadLength(f"need at least 2 weights, got {w.shape[0]}")
    if not eps > 0:
        raise OutOfBounds(f"epsilon_bound must be positive, got {eps}")
    if not np.all(np.isfinite(w)):
        raise OutOfBounds("weights must be finite")
    s = float(w.sum())
    if abs(s - 1.0) > sum_tol:
        raise SumNotOne(f"weights sum to {s!r}, expected 1 within {sum_tol}")
    bad = np.flatnonzero((w <= eps) | (w >= 1.0 - eps))
    if bad.size:
        i = int(bad[0])
        raise OutOfBounds(
            f"weight[{i}] = {w[i]!r} outside ({eps}, {1.0 - eps})"
        )


def validate_weights(w, epsilon_bound: float = DEFAULT_EPSILON) -> WeightVector:
    """Validate a raw weight vector.

    Inputs summing to 1 within 1e-9 are accepted and renormalised to the
    1e-12 internal tolerance; anything further off is rejected, never repaired.

    Raises
    ------
    BadLength, SumNotOne, OutOfBounds
    """
    if isinstance(w, WeightVector):
        w = w.weights
    arr = np.asarray(w, dtype=float)
    if arr.size == 0:
        raise BadLength("empty weight vector")
    _check_weights(arr, epsilon_bound, INPUT_SUM_TOL)
    s = arr.sum()
    if abs(s - 1.0) > INTERNAL_SUM_TOL:
        arr = arr / s
    return WeightVector(arr, epsilon_bound)


def as_weights(w, epsilon_bound: float = DEFAULT_EPSILON) -> WeightVector:
    """Coerce ``w`` to a WeightVector, passing existing ones through."""
    if isinstance(w, WeightVector):
        return w
    return validate_weights(w, epsilon_bound)


@dataclass(frozen=True)
class PriceVector:
    """Market prices in units of the numeraire token."""

    prices: np.ndarray
    numeraire_index: int = 0

    def __post_init__(self):
        p = _frozen(self.prices)
        object.__setattr__(self, "prices", p)
        if p.ndim != 1 or p.shape[0] < 1:
            raise BadLength("prices must be a non-empty vector")
        if not 0 <= self.numeraire_index < p.shape[0]:
            raise IndexOutOfRange(f"numeraire index {self.numeraire_index} out of range")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise OutOfBounds("prices must be finite and strictly positive")
        if p[self.numeraire_index] != 1.0:
            raise TFMMError(
                f"numeraire price must be exactly 1, got {p[self.numeraire_index]!r}"
            )

    def __len__(self) -> int:
        return self.prices.shape[0]

    @classmethod
    def normalised(cls, raw, numeraire_index: int = 0) -> "PriceVector":
        """Divide raw prices by the numeraire's price."""
        raw = np.asarray(raw, dtype=float)
        if not 0 <= numeraire_index < raw.shape[0]:
            raise IndexOutOfRange(f"numeraire index {numeraire_index} out of range")
        p = raw / raw[numeraire_index]
        p[numeraire_index] = 1.0
        return cls(p, numeraire_index)

    @classmethod
    def ones(cls, n: int) -> "PriceVector":
        return cls(np.ones(n))


@dataclass(frozen=True)
class PoolState:
    reserves: np.ndarray
    weights: WeightVector
    block_index: int = 0

    def __post_init__(self):
        r = _frozen(self.reserves)
        object.__setattr__(self, "reserves", r)
        if r.ndim != 1 or r.shape[0] != len(self.weights):
            raise DimensionMismatch(
                f"{r.shape} reserves for {len(self.weights)} weights"
            )
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise OutOfBounds("reserves must be finite and strictly positive")

    @property
    def n(self) -> int:
        return self.reserves.shape[0]

    def invariant(self, weights=None) -> float:
        """The trading-function value prod R_i^{w_i}, by default at the pool's own weights."""
        w = self.weights.weights if weights is None else np.asarray(weights, dtype=float)
        return float(np.exp(np.dot(w, np.log(self.reserves))))

    def quoted_prices(self, numeraire: int = 0) -> np.ndarray:
        if not 0 <= numeraire < self.n:
            raise IndexOutOfRange(f"numeraire index {numeraire} out of range")
        marg = self.weights.weights / self.reserves
        return marg / marg[numeraire]

    @classmethod
    def at_equilibrium(
        cls, value: float, weights: WeightVector, prices: PriceVector, block_index: int = 0
    ) -> "PoolState":
        """Pool worth ``value`` numeraire units whose quoted prices equal ``prices``."""
        if len(weights) != len(prices):
            raise DimensionMismatch("weights and prices differ in length")
        reserves = value * weights.weights / prices.prices
        return cls(reserves, weights, block_index)


def quoted_price(pool: PoolState, i: int, numeraire: int = 0) -> float:
    """Pool-quoted price of token ``i`` in units of token ``numeraire``."""
    n = pool.n
    if not (0 <= i < n and 0 <= numeraire < n):
        raise IndexOutOfRange(f"token index out of range for {n}-token pool")
    if i == numeraire:
        return 1.0
    w = pool.weights.weights
    r = pool.reserves
    return float((w[i] / r[i]) / (w[numeraire] / r[numeraire]))


def pool_value(pool: PoolState, prices: PriceVector) -> float:
    """Market value p . R of the pool's reserves, in numeraire units."""
    if len(prices) != pool.n:
        raise DimensionMismatch(f"{len(prices)} prices for {pool.n}-token pool")
    return float(np.dot(prices.prices, pool.reserves))


@dataclass(frozen=True)
class Trajectory:
    """Weights w(t_0), ..., w(t_f) visited while moving between two targets.

    ``steps`` is stored as an (f+1, N) read-only array; every row is a valid
    weight vector.
    """

    steps: np.ndarray
    scheme_label: Scheme
    epsilon_bound: float = DEFAULT_EPSILON
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = _frozen(self.steps)
        object.__setattr__(self, "steps", s)
        object.__setattr__(self, "scheme_label", Scheme.parse(self.scheme_label))
        if s.ndim != 2 or s.shape[0] < 2:
            raise BadLength("a trajectory needs at least two steps")
        if s.shape[1] < 2:
            raise BadLength("trajectory steps need at least 2 weights")
        eps = self.epsilon_bound
        ok = (
            np.all(np.isfinite(s), axis=1)
            & (np.abs(s.sum(axis=1) - 1.0) <= INTERNAL_SUM_TOL)
            & np.all((s > eps) & (s < 1.0 - eps), axis=1)
        )
        if not ok.all():
            k = int(np.flatnonzero(~ok)[0])
            try:
                _check_weights(s[k], eps, INTERNAL_SUM_TOL)
            except TFMMError as exc:
                raise type(exc)(f"trajectory step {k}: {exc}") from None

    @property
    def num_steps(self) -> int:
        """f, the number of weight changes."""
        return self.steps.shape[0] - 1

    @property
    def n(self) -> int:
        return self.steps.shape[1]

    @property
    def start(self) -> WeightVector:
        return WeightVector(self.steps[0], self.epsilon_bound)

    @property
    def end(self) -> WeightVector:
        return WeightVector(self.steps[-1], self.epsilon_bound)

    def __len__(self) -> int:
        return self.steps.shape[0]

    def __getitem__(self, k: int) -> WeightVector:
        return WeightVector(self.steps[k], self.epsilon_bound)

    def deltas(self) -> np.ndarray:
        """Block-to-block changes w(t_{k+1}) - w(t_k), shape (f, N)."""
        return np.diff(self.steps, axis=0)

    @classmethod
    def from_steps(
        cls,
        steps: Iterable[Sequence[float]],
        scheme_label,
        epsilon_bound: float = DEFAULT_EPSILON,
        renormalise: bool = True,
    ) -> "Trajectory":
        arr = np.array(list(steps) if not isinstance(steps, np.ndarray) else steps, dtype=float)
        if renormalise:
            sums = arr.sum(axis=1, keepdims=True)
            if np.any(np.abs(sums - 1.0) > INPUT_SUM_TOL):
                raise SumNotOne("trajectory step does not sum to 1")
            arr = arr / sums
        return cls(arr, scheme_label, epsilon_bound)
