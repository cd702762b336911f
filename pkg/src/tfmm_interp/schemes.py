"""Weight interpolation schemes and the two-step optimal intermediate.

Linear interpolation moves along the arithmetic-mean curve; the geometric
curve is the componentwise geometric interpolant; the approximately-optimal
trajectory normalises their sum at every step. The exact optimal single
intermediate needs the Lambert W function and is provided for reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_EPSILON,
    BadLength,
    DimensionMismatch,
    Scheme,
    Trajectory,
    WeightVector,
    as_weights,
)
from .special import lambert_w0


@dataclass(frozen=True)
class InterpolationRequest:
    w_start: WeightVector
    w_end: WeightVector
    num_steps: int

    def __post_init__(self):
        object.__setattr__(self, "w_start", as_weights(self.w_start))
        object.__setattr__(self, "w_end", as_weights(self.w_end))
        if len(self.w_start) != len(self.w_end):
            raise DimensionMismatch("start and end weights differ in length")
        if int(self.num_steps) != self.num_steps or self.num_steps < 1:
            raise BadLength(f"num_steps must be an integer >= 1, got {self.num_steps!r}")
        object.__setattr__(self, "num_steps", int(self.num_steps))

    @property
    def epsilon_bound(self) -> float:
        return min(self.w_start.epsilon_bound, self.w_end.epsilon_bound)


def optimal_intermediate(w0, wf) -> np.ndarray:
    """Componentwise maximiser of the two-step reserve ratio, wf_i / W0(e * wf_i / w0_i).

    Not renormalised: the result ignores the sum-to-one constraint and is only
    exact in the small-change limit.
    """
    a = as_weights(w0).weights
    b = as_weights(wf).weights
    if a.shape != b.shape:
        raise DimensionMismatch("weight vectors differ in length")
    return b / lambert_w0(np.e * b / a)


def d_r_d_wtilde(w0, w_mid, wf) -> np.ndarray:
    """Gradient of the two-step ratio r with respect to the intermediate weights.

    dr/dw_mid_i = r * (wf_i / w_mid_i + log(w0_i / w_mid_i) - 1)
    """
    from .reserves import two_step_ratio

    a = np.asarray(w0, dtype=float)
    m = np.asarray(w_mid, dtype=float)
    b = np.asarray(wf, dtype=float)
    if not (a.shape == m.shape == b.shape):
        raise DimensionMismatch("weight vectors differ in length")
    if np.any(m <= 0) or np.any(m >= 1):
        raise ValueError("w_mid must lie strictly inside (0, 1)")
    r = two_step_ratio(a, m, b, check_range=False)
    return r * (b / m + np.log(a / m) - 1.0)


def _fractions(f: int) -> np.ndarray:
    return (np.arange(f + 1, dtype=float) / f)[:, None]


def arithmetic_curve(req: InterpolationRequest) -> np.ndarray:
    t = _fractions(req.num_steps)
    out = (1.0 - t) * req.w_start.weights + t * req.w_end.weights
    out[0] = req.w_start.weights
    out[-1] = req.w_end.weights
    return out


def geometric_curve(req: InterpolationRequest) -> np.ndarray:
    """Raw geometric interpolants; rows generally do not sum to one."""
    t = _fractions(req.num_steps)
    out = req.w_start.weights ** (1.0 - t) * req.w_end.weights ** t
    out[0] = req.w_start.weights
    out[-1] = req.w_end.weights
    return out


def _pin_endpoints(steps: np.ndarray, req: InterpolationRequest) -> np.ndarray:
    steps[0] = req.w_start.weights
    steps[-1] = req.w_end.weights
    return steps


def linear_trajectory(req: InterpolationRequest) -> Trajectory:
    steps = arithmetic_curve(req)
    steps /= steps.sum(axis=1, keepdims=True)
    return Trajectory(_pin_endpoints(steps, req), Scheme.LINEAR, req.epsilon_bound)


def geometric_trajectory(req: InterpolationRequest) -> Trajectory:
    """Geometric interpolation, normalised onto the simplex at every step.

    The raw (unnormalised) curve is available as :func:`geometric_curve`.
    """
    raw = geometric_curve(req)
    steps = raw / raw.sum(axis=1, keepdims=True)
    return Trajectory(_pin_endpoints(steps, req), Scheme.GEOMETRIC, req.epsilon_bound)


def approx_optimal_trajectory(req: InterpolationRequest) -> Trajectory:
    """Normalised average of the arithmetic and geometric interpolation curves.

    w_i(t_k) = (am_i(t_k) + gm_i(t_k)) / sum_j (am_j(t_k) + gm_j(t_k))
    """
    total = arithmetic_curve(req) + geometric_curve(req)
    steps = total / total.sum(axis=1, keepdims=True)
    return Trajectory(_pin_endpoints(steps, req), Scheme.APPROX_OPTIMAL, req.epsilon_bound)


def one_step_trajectory(req: InterpolationRequest) -> Trajectory:
    """Jump straight to the end weights on the first step, then hold."""
    f = req.num_steps
    steps = np.tile(req.w_end.weights, (f + 1, 1))
    steps[0] = req.w_start.weights
    return Trajectory(steps, Scheme.ONE_STEP, req.epsilon_bound)


def make_trajectory(req: InterpolationRequest, scheme, **optimizer_kwargs) -> Trajectory:
    """Dispatch on scheme label.

    ``NUMERICAL_OPTIMAL`` runs the trajectory optimiser at unit prices
    (the optimum does not depend on prices or reserves).
    """
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.ONE_STEP:
        return one_step_trajectory(req)
    if scheme is Scheme.LINEAR:
        return linear_trajectory(req)
    if scheme is Scheme.GEOMETRIC:
        return geometric_trajectory(req)
    if scheme is Scheme.APPROX_OPTIMAL:
        return approx_optimal_trajectory(req)
    from .optimizer import optimal_trajectory

    return optimal_trajectory(req, **optimizer_kwargs)


__all__ = [
    "DEFAULT_EPSILON",
    "InterpolationRequest",
    "approx_optimal_trajectory",
    "arithmetic_curve",
    "d_r_d_wtilde",
    "geometric_curve",
    "geometric_trajectory",
    "lambert_w0",
    "linear_trajectory",
    "make_trajectory",
    "one_step_trajectory",
    "optimal_intermediate",
]
