"""Lie-group structure of the joint scaling/warping parameter space.

A parameter point is (xi, psi): xi is the log time-scale and psi is the
square-root slope of a unit-interval warp, a point on the positive orthant
of the unit sphere in L2([0, 1]).  The pivot (log b) is always derived from
xi and the two censoring points, so it is never stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline, PchipInterpolator

from .core import (
    CensoredSrvf,
    GroupElement,
    InvalidInputError,
    NonInvertibleWarpError,
    OrthantViolationError,
    Warp,
    uniform_grid,
)

UNIT_NORM_TOL = 1e-6
RENORM_TRIGGER = 1e-9


def _unit_times(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


def _l2_norm(z: np.ndarray, times: np.ndarray) -> float:
    return float(np.sqrt(max(trapezoid(z * z, times), 0.0)))


@dataclass(eq=False)
class ParamPoint:
    """Element (xi, psi) of the parameter group; psi on a uniform [0, 1] grid."""

    xi: float
    psi: np.ndarray

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=float)
        if self.psi.ndim != 1 or self.psi.size < 3:
            raise InvalidInputError("ParamPoint: psi needs at least 3 samples")
        t = _unit_times(self.psi.size)
        if abs(_l2_norm(self.psi, t) - 1.0) > UNIT_NORM_TOL:
            raise InvalidInputError("ParamPoint: psi must have unit L2 norm")
        if np.any(self.psi < -1e-12):
            raise OrthantViolationError("ParamPoint: psi must be nonnegative")
        # positivity a.e.: every cell of the cumulative integral must advance
        if np.any(self.psi[:-1] ** 2 + self.psi[1:] ** 2 <= 0.0):
            raise InvalidInputError("ParamPoint: psi vanishes on a whole grid cell")

    @property
    def times(self) -> np.ndarray:
        return _unit_times(self.psi.size)

    def warp_values(self) -> np.ndarray:
        """Unit-interval warp gamma = int_0^t psi^2, rescaled so gamma(1) = 1.

        Integrates the pchip interpolant of psi^2: shape preservation keeps
        the interpolant positive, hence gamma strictly increasing, while the
        quadrature error drops two orders below the trapezoid rule.
        """
        t = self.times
        g = PchipInterpolator(t, self.psi**2).antiderivative()(t)
        return g / g[-1]


@dataclass(eq=False)
class TangentVector:
    """Tangent vector (y, z) at identity; z has zero mean on [0, 1]."""

    y: float
    z: np.ndarray

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.ndim != 1 or self.z.size < 3:
            raise InvalidInputError("TangentVector: z needs at least 3 samples")
        if abs(trapezoid(self.z, _unit_times(self.z.size))) > UNIT_NORM_TOL:
            raise InvalidInputError("TangentVector: z must integrate to zero")

    @property
    def times(self) -> np.ndarray:
        return _unit_times(self.z.size)

    def scaled(self, alpha: float) -> "TangentVector":
        return TangentVector(alpha * self.y, alpha * self.z)


def identity_point(n: int = 100) -> ParamPoint:
    return ParamPoint(0.0, np.ones(n))


def inner_product(v1: TangentVector, v2: TangentVector) -> float:
    """<<v1, v2>> = y1*y2 + <z1, z2>_{L2}."""
    if v1.z.size != v2.z.size:
        raise InvalidInputError("inner_product: mismatched tangent grids")
    return float(v1.y * v2.y + trapezoid(v1.z * v2.z, v1.times))


def tangent_norm(v: TangentVector) -> float:
    return float(np.sqrt(max(inner_product(v, v), 0.0)))


def exp_identity(v: TangentVector) -> ParamPoint:
    """Exponential map at identity: (y, cos|z| + sin|z| * z/|z|).

    The z component is projected to exact zero mean first, which keeps the
    output on the unit sphere to machine precision.  Raises
    OrthantViolationError if the image leaves the positive orthant (the
    caller is expected to shrink its step).
    """
    t = v.times
    z = v.z - trapezoid(v.z, t)
    nz = _l2_norm(z, t)
    if nz < 1e-14:
        return ParamPoint(v.y, np.ones_like(z))
    psi = np.cos(nz) + np.sin(nz) * z / nz
    if np.any(psi < 0.0):
        raise OrthantViolationError("exp_identity: update leaves the positive orthant")
    return ParamPoint(v.y, psi)


def _renormalize(psi: np.ndarray) -> np.ndarray:
    t = _unit_times(psi.size)
    nrm = _l2_norm(psi, t)
    if abs(nrm - 1.0) > RENORM_TRIGGER:
        psi = psi / nrm
    return psi


def group_compose(p1: ParamPoint, p2: ParamPoint) -> ParamPoint:
    """Group operation: xi adds, psi composes as (psi1 o gamma2) * psi2."""
    gamma2 = p2.warp_values()
    # cubic-spline read-through of psi1; clamped because a spline may
    # undershoot slightly where psi1 approaches zero
    psi1_at = CubicSpline(p1.times, p1.psi)(gamma2)
    psi = _renormalize(np.maximum(psi1_at * p2.psi, 0.0))
    return ParamPoint(p1.xi + p2.xi, psi)


def group_inverse(p: ParamPoint) -> ParamPoint:
    """Inverse (-xi, psi of the inverse warp).

    The inverse warp's SRVF is 1/psi evaluated along gamma^{-1}; this uses
    gamma' = psi^2 exactly instead of re-differentiating the inverted warp.
    """
    if np.min(p.psi) <= 1e-12:
        raise NonInvertibleWarpError("group_inverse: psi touches zero at grid resolution")
    t = p.times
    gamma = p.warp_values()
    # monotone cubic inversion: the inverse warp steepens like 1/psi^2 where
    # psi is small, which linear interpolation resolves poorly
    gamma_inv = PchipInterpolator(gamma, t)(t)
    psi_at = np.maximum(CubicSpline(t, p.psi)(gamma_inv), np.min(p.psi) * 0.5)
    return ParamPoint(-p.xi, _renormalize(1.0 / psi_at))


def psi_from_warp(times: np.ndarray, values: np.ndarray, n: int = 100) -> np.ndarray:
    """SRVF of a sampled increasing warp, rescaled to the unit interval."""
    span_t = times[-1] - times[0]
    span_v = values[-1] - values[0]
    if span_t <= 0 or span_v <= 0:
        raise NonInvertibleWarpError("psi_from_warp: degenerate warp samples")
    ut = _unit_times(n)
    gamma = np.interp(ut * span_t + times[0], times, values)
    gamma = (gamma - gamma[0]) / span_v
    slope = np.maximum(np.gradient(gamma, ut, edge_order=1), 0.0)
    return _renormalize(np.sqrt(slope))


def m_inverse(xi: float, pivot: float, psi: np.ndarray) -> GroupElement:
    """Rebuild the group element (a, b, gamma) = (e^xi, pivot, int psi^2)."""
    p = ParamPoint(0.0, np.asarray(psi, dtype=float))
    # gamma' = psi^2 exactly; carrying it avoids re-differentiating samples
    warp = Warp(p.times, p.warp_values(), interval_end=1.0, slope_values=p.psi**2)
    return GroupElement(float(np.exp(xi)), float(pivot), warp)


def derived_pivot(p: ParamPoint, censor: float, other_censor: float) -> float:
    """Pivot b = min(c1, c2 * e^{-xi}) shared by the action and the energy."""
    return float(min(other_censor, censor * np.exp(-p.xi)))


def act(cq: CensoredSrvf, p: ParamPoint, other_censor: float) -> CensoredSrvf:
    """Apply (xi, psi) to a censored SRVF, pivoting at b = min(c1, c*e^{-xi}).

    Below the pivot the warped-scaled branch applies; beyond it the map is a
    pure scaling q(e^xi t) e^{xi/2}.  The censoring point maps to c * e^{-xi}
    and the output lives on a fresh uniform grid of the same size.
    """
    a = float(np.exp(p.xi))
    new_c = cq.censor_point / a
    b = derived_pivot(p, cq.censor_point, other_censor)
    grid = uniform_grid(new_c, len(cq))
    sqrt_a = np.sqrt(a)

    vals = cq.at(a * grid) * sqrt_a  # t > b branch
    inner = grid <= b * (1.0 + 1e-9)  # pivot branch is inclusive at t = b
    if np.any(inner):
        u = np.clip(grid[inner] / b, 0.0, 1.0)
        gamma_u = np.interp(u, p.times, p.warp_values())
        psi_u = np.interp(u, p.times, p.psi)
        vals[inner] = cq.at(a * b * gamma_u) * sqrt_a * psi_u
    return CensoredSrvf(grid, vals, initial_value=cq.initial_value)
