"""Principal branch of the Lambert W function for non-negative real arguments."""

from __future__ import annotations

import numpy as np

from .core import DomainError

MAX_ITER = 50
_TOL = 1e-15


def _initial_guess(x: np.ndarray) -> np.ndarray:
    guess = np.empty_like(x)
    small = x < 0.5
    mid = (x >= 0.5) & (x <= np.e)
    big = x > np.e
    xs = x[small]
    guess[small] = xs * (1.0 - xs * (1.0 - 1.5 * xs))
    guess[mid] = 0.5 * np.log1p(x[mid]) + 0.25
    lx = np.log(x[big])
    guess[big] = lx - np.log(lx) + np.log(lx) / lx
    return guess


def lambert_w0(x):
    """Solve w * exp(w) = x on the principal branch, for x >= 0.

    Halley iteration from a series guess (small x), a log1p guess (moderate x)
    or the asymptotic log(x) - log(log(x)) guess (x > e). Scalars in give a
    float out; arrays give arrays.
    """
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.isnan(xa)) or np.any(xa < 0):
        raise DomainError("lambert_w0 is only defined here for x >= 0")
    w = np.zeros_like(xa)
    pos = xa > 0
    if np.any(pos):
        xp = xa[pos]
        finite = np.isfinite(xp)
        wp = np.full_like(xp, np.inf)
        xf = xp[finite]
        wf = _initial_guess(xf)
        active = np.ones(wf.shape, dtype=bool)
        for _ in range(MAX_ITER):
            wa = wf[active]
            ew = np.exp(wa)
            resid = wa * ew - xf[active]
            wp1 = wa + 1.0
            step = resid / (ew * wp1 - (wa + 2.0) * resid / (2.0 * wp1))
            wf[active] = wa - step
            done = np.abs(step) <= _TOL * (1.0 + np.abs(wf[active]))
            idx = np.flatnonzero(active)
            active[idx[done]] = False
            if not active.any():
                break
        wp[finite] = wf
        w[pos] = wp
    return float(w[0]) if scalar else w
