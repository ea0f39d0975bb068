"""Fixed-interval dense elastic registration by dynamic programming.

Given two SRVFs on a shared uniform grid over [0, b], finds the
boundary-preserving warp minimizing || q1 - (q2 o gamma) sqrt(gamma') ||
over a lattice of monotone paths.
"""

from __future__ import annotations

from math import gcd

import numpy as np

from . import _kernels
from .core import CensoredSrvf, InvalidInputError, Warp


def slope_steps(max_slope: int = 4) -> np.ndarray:
    """Allowed DP moves (di, dj) with slopes in [1/max_slope, max_slope].

    Reduced fractions only; ordered so that on cost ties the move closest
    to unit slope wins (deterministic, identity-biased), with the shallower
    slope breaking exact |log slope| ties.
    """
    if max_slope < 1:
        raise InvalidInputError("slope_steps: max_slope must be >= 1")
    pairs = [
        (di, dj)
        for di in range(1, max_slope + 1)
        for dj in range(1, max_slope + 1)
        if gcd(di, dj) == 1
    ]
    pairs.sort(key=lambda p: (abs(np.log(p[1] / p[0])), p[1] / p[0]))
    return np.asarray(pairs, dtype=np.int64)


def dp_elastic_align(q1: CensoredSrvf, q2: CensoredSrvf, max_slope: int = 4):
    """Optimal fixed-boundary warp of q2 onto q1 and the achieved residual.

    Both inputs must share one uniform grid (same censoring point and
    sample count).  Returns (warp, residual); the warp fixes 0 and the
    right endpoint, and the residual is the square root of the optimal
    path cost, which never exceeds ||q1 - q2|| on the shared grid.
    """
    if len(q1) != len(q2):
        raise InvalidInputError("dp_elastic_align: sample counts differ")
    b = q1.censor_point
    if abs(q2.censor_point - b) > 1e-9 * max(b, 1.0):
        raise InvalidInputError("dp_elastic_align: grids do not match")
    dt = b / (len(q1) - 1)
    gamma, cost = _kernels.dp_align_kernel(
        np.ascontiguousarray(q1.values),
        np.ascontiguousarray(q2.values),
        dt,
        slope_steps(max_slope),
    )
    warp = Warp(q1.times.copy(), gamma, interval_end=b)
    return warp, float(np.sqrt(max(cost, 0.0)))


def complete_with_identity(gamma: Warp) -> Warp:
    """Extend a fixed-interval warp with the identity beyond its pivot."""
    if not np.isfinite(gamma.interval_end):
        return gamma
    b = gamma.interval_end
    if abs(gamma.values[-1] - b) > 1e-8 * max(b, 1.0):
        raise InvalidInputError("complete_with_identity: warp must fix its endpoint")
    return Warp(
        gamma.times.copy(),
        gamma.values.copy(),
        interval_end=np.inf,
        slope_values=None if gamma.slope_values is None else gamma.slope_values.copy(),
    )
