"""Core types and transforms for right-censored functional data.

A censored function is a pair (c, f): f is observed on a uniform grid over
[0, c] and treated as identically zero beyond its censoring point c.  All
comparisons happen in the square-root velocity representation, where time
warping acts by isometries of the L2 metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid


class InvalidInputError(ValueError):
    """Raised when an input violates a documented precondition."""


class NonInvertibleWarpError(InvalidInputError):
    """Raised when warp samples are not strictly increasing (or touch zero)."""


class OrthantViolationError(RuntimeError):
    """Raised when an exponential-map update leaves the positive orthant."""


class DegenerateInputError(ValueError):
    """Raised when an input is too degenerate to process (e.g. all-zero matrix)."""


def uniform_grid(end: float, n: int) -> np.ndarray:
    return np.linspace(0.0, float(end), int(n))


def _eval_censored(t, times: np.ndarray, values: np.ndarray):
    """Linear interpolation with zero beyond the censoring point.

    Queries within one part in 1e9 of the censor count as inside, so that
    round-tripped grid endpoints do not fall off the support.
    """
    t = np.asarray(t, dtype=float)
    c = times[-1]
    edge = c * (1.0 + 1e-9)
    t = np.where((t > c) & (t <= edge), c, t)
    return np.interp(t, times, values, right=0.0)


def _check_uniform(times: np.ndarray, what: str) -> None:
    if times.ndim != 1 or times.size < 3:
        raise InvalidInputError(f"{what}: need at least 3 samples, got {times.size}")
    if times[0] != 0.0:
        raise InvalidInputError(f"{what}: grid must start at 0, got {times[0]}")
    steps = np.diff(times)
    if np.any(steps <= 0):
        raise InvalidInputError(f"{what}: grid must be strictly increasing")
    if not np.allclose(steps, steps[0], rtol=1e-8, atol=1e-12 * max(times[-1], 1.0)):
        raise InvalidInputError(f"{what}: grid must be uniform")


@dataclass(eq=False)
class CensoredFunction:
    """A function sampled on a uniform grid over [0, c], zero beyond c."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        _check_uniform(self.times, "CensoredFunction")
        if self.values.shape != self.times.shape:
            raise InvalidInputError("CensoredFunction: times/values length mismatch")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("CensoredFunction: non-finite values")

    @property
    def censor_point(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return self.times.size

    def at(self, t) -> np.ndarray:
        """Evaluate by linear interpolation; zero beyond the censoring point."""
        return _eval_censored(t, self.times, self.values)


@dataclass(eq=False)
class CensoredSrvf:
    """Square-root velocity representation of a censored function."""

    times: np.ndarray
    values: np.ndarray
    initial_value: float = 0.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        _check_uniform(self.times, "CensoredSrvf")
        if self.values.shape != self.times.shape:
            raise InvalidInputError("CensoredSrvf: times/values length mismatch")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("CensoredSrvf: non-finite values")

    @property
    def censor_point(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return self.times.size

    def at(self, t) -> np.ndarray:
        return _eval_censored(t, self.times, self.values)

    def norm(self) -> float:
        """L2 norm over [0, c] (the function vanishes beyond)."""
        return float(np.sqrt(trapezoid(self.values**2, self.times)))


@dataclass(eq=False)
class Warp:
    """Sampled monotone reparameterization of [0, interval_end].

    ``interval_end = inf`` marks a warp completed with identity beyond its
    last sample (an element of the time-warping group N).
    """

    times: np.ndarray
    values: np.ndarray
    interval_end: float = field(default=np.inf)
    slope_values: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.slope_values is not None:
            self.slope_values = np.asarray(self.slope_values, dtype=float)
        if self.times.size != self.values.size or self.times.size < 2:
            raise InvalidInputError("Warp: need matched sample arrays (>= 2 points)")
        if np.any(np.diff(self.times) <= 0) or np.any(np.diff(self.values) <= 0):
            raise NonInvertibleWarpError("Warp: samples must be strictly increasing")
        if abs(self.values[0]) > 1e-12 * max(1.0, self.times[-1]):
            raise InvalidInputError("Warp: must fix the origin")
        if np.isfinite(self.interval_end):
            tol = 1e-8 * max(1.0, self.interval_end)
            if abs(self.times[-1] - self.interval_end) > tol or abs(self.values[-1] - self.interval_end) > tol:
                raise InvalidInputError("Warp: fixed-interval warp must fix its right endpoint")

    @property
    def pivot(self) -> float:
        """Last sampled time; identity beyond it when completed."""
        return float(self.times[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = np.interp(t, self.times, self.values)
        if np.isinf(self.interval_end):
            return np.where(t > self.pivot, t, inside)
        if np.any(t > self.times[-1] + 1e-9 * max(1.0, self.pivot)):
            raise InvalidInputError("Warp: evaluation beyond the fixed interval")
        return inside

    def inverse(self, s):
        """Inverse warp values at ``s`` (within the sampled range)."""
        s = np.asarray(s, dtype=float)
        inside = np.interp(s, self.values, self.times)
        if np.isinf(self.interval_end):
            return np.where(s > self.values[-1], s, inside)
        return inside

    def derivative(self) -> np.ndarray:
        """Slope at the sample times (exact when known by construction)."""
        if self.slope_values is not None:
            return self.slope_values
        return np.gradient(self.values, self.times, edge_order=2)


def identity_warp(end: float, n: int = 100, completed: bool = False) -> Warp:
    t = uniform_grid(end, n)
    return Warp(t, t.copy(), interval_end=np.inf if completed else float(end))


@dataclass(eq=False)
class GroupElement:
    """Joint time-warping/time-scaling map: g(t) = a*b*gamma(t/b) for t <= b, a*t beyond."""

    scale: float
    pivot: float
    unit_warp: Warp

    def __post_init__(self):
        if self.scale <= 0 or self.pivot <= 0:
            raise InvalidInputError("GroupElement: scale and pivot must be positive")
        if abs(self.unit_warp.times[-1] - 1.0) > 1e-9:
            raise InvalidInputError("GroupElement: unit_warp must live on [0, 1]")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.scale, self.pivot
        u = np.clip(t / b, 0.0, 1.0)
        inner = a * b * np.interp(u, self.unit_warp.times, self.unit_warp.values)
        return np.where(t > b, a * t, inner)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.scale, self.pivot
        u = np.clip(t / b, 0.0, 1.0)
        dgamma = np.interp(u, self.unit_warp.times, self.unit_warp.derivative())
        return np.where(t > b, a, a * dgamma)

    def inverse_at(self, c: float) -> float:
        """Preimage of a time point: g^{-1}(c)."""
        a, b = self.scale, self.pivot
        if c >= a * b:
            return float(c / a)
        return float(b * np.interp(c / (a * b), self.unit_warp.values, self.unit_warp.times))

    @classmethod
    def identity(cls, pivot: float = 1.0, n: int = 100) -> "GroupElement":
        return cls(1.0, pivot, identity_warp(1.0, n))


def srvf_from_function(f: CensoredFunction) -> CensoredSrvf:
    """SRVF transform q = sign(df/dt) * sqrt(|df/dt|).

    The derivative uses central differences on interior points and
    second-order one-sided stencils at the endpoints; flat regions map to
    q = 0 exactly.
    """
    if len(f) < 3:
        raise InvalidInputError("srvf_from_function: need at least 3 samples")
    df = np.gradient(f.values, f.times, edge_order=2)
    q = np.sign(df) * np.sqrt(np.abs(df))
    return CensoredSrvf(f.times.copy(), q, initial_value=float(f.values[0]))


def function_from_srvf(q: CensoredSrvf) -> CensoredFunction:
    """Reconstruct f(t) = f(0) + int_0^t q|q| by cumulative trapezoid."""
    integrand = q.values * np.abs(q.values)
    vals = q.initial_value + cumulative_trapezoid(integrand, q.times, initial=0.0)
    return CensoredFunction(q.times.copy(), vals)


def _split_l2_sq(q1: CensoredSrvf, q2: CensoredSrvf, tail_weight: float = 1.0):
    """Squared L2 mismatch split at the smaller censoring point.

    Returns (head, tail): the integral of (q1 - q2)^2 over [0, min(c1, c2)]
    and over [min, max] where only the longer input survives.  ``tail_weight``
    multiplies the tail term.  Both pieces use a trapezoid rule on a common
    grid of max(len(q1), len(q2)) points per piece.
    """
    c1, c2 = q1.censor_point, q2.censor_point
    b, m = min(c1, c2), max(c1, c2)
    n = max(len(q1), len(q2))
    grid = np.linspace(0.0, b, n)
    head = float(trapezoid((q1.at(grid) - q2.at(grid)) ** 2, grid))
    if m - b <= 1e-12 * m:
        return head, 0.0
    longer = q1 if c1 >= c2 else q2
    tgrid = np.linspace(b, m, n)
    # the shorter input is identically zero on (b, m]
    tail = float(trapezoid(longer.at(tgrid) ** 2, tgrid))
    return head, tail_weight * tail


def preshape_distance(q1: CensoredSrvf, q2: CensoredSrvf) -> float:
    """L2 distance between censored SRVFs over [0, inf) (finite by censoring)."""
    head, tail = _split_l2_sq(q1, q2)
    return float(np.sqrt(max(head + tail, 0.0)))


def warp_function(f: CensoredFunction, g: GroupElement) -> CensoredFunction:
    """Right action on functions: (c, f) -> (g^{-1}(c), f o g)."""
    new_c = g.inverse_at(f.censor_point)
    grid = uniform_grid(new_c, len(f))
    return CensoredFunction(grid, f.at(g(grid)))


def warp_srvf(q: CensoredSrvf, g: GroupElement) -> CensoredSrvf:
    """Right action on SRVFs: (c, q) -> (g^{-1}(c), (q o g) sqrt(g'))."""
    new_c = g.inverse_at(q.censor_point)
    grid = uniform_grid(new_c, len(q))
    vals = q.at(g(grid)) * np.sqrt(np.maximum(g.derivative(grid), 0.0))
    return CensoredSrvf(grid, vals, initial_value=q.initial_value)
