"""Singular initial data for the nonexistence results."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import elementwise

from .errors import ConfigError, InversionFailure, NotConvex, RangeError
from .nonlinearity import NonlinearitySpec
from .uloc_grid import Grid, GridField, refine_trend, Trend, uloc_norm, UlocParams


@dataclass(frozen=True, eq=False)
class ConvexGrowth:
    """A convex increasing g on [s0, inf); f = exp(g) is the source it models.

    ``g_inv`` is optional; without it g^{-1} is found by bracketing.
    """

    g: Callable
    g_prime: Callable
    s0: float = 0.0
    alpha: float = 6.0
    g_inv: Optional[Callable] = None
    label: str = "g"
    check_grid: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not self.alpha > 2:
            raise ConfigError("profile strength alpha must exceed 2")
        s = self.check_grid
        if s is None:
            s = self.s0 + np.geomspace(1e-3, 1e6, 400)
        gp = np.asarray(self.g_prime(s), float)
        if np.any(gp <= 0):
            raise NotConvex("g' must be positive beyond s0")
        jumps = np.diff(gp)
        if np.any(jumps < -1e-12 * np.abs(gp[1:])):
            raise NotConvex("sampled g'' is negative beyond s0")
        # g''/(g')^2 -> 0, read off the divided differences of g'
        ratio = np.diff(gp) / np.diff(s) / gp[1:] ** 2
        if ratio[-1] > 1e-3 or ratio[-1] > abs(ratio[0]) + 1e-12:
            raise NotConvex("g''/(g')^2 does not decay along the sampled grid")

    @classmethod
    def identity(cls, s0: float = 0.0, alpha: float = 6.0) -> "ConvexGrowth":
        return cls(lambda s: np.asarray(s, float), lambda s: np.ones(np.shape(s)), s0, alpha,
                   lambda y: np.asarray(y, float), "s")

    @classmethod
    def square(cls, s0: float = 1.0, alpha: float = 6.0) -> "ConvexGrowth":
        return cls(lambda s: np.asarray(s, float) ** 2, lambda s: 2 * np.asarray(s, float), s0,
                   alpha, lambda y: np.sqrt(np.asarray(y, float)), "s^2")

    def inverse(self, y):
        """g^{-1} on [g(s0), inf), by the closed form if given, else bracketing."""
        y = np.asarray(y, float)
        if self.g_inv is not None:
            return self.g_inv(y)
        return self.inverse_generic(y)

    def inverse_generic(self, y):
        y = np.asarray(y, float)
        g0 = float(self.g(np.array(self.s0)))
        if np.any(y < g0 - 1e-12 * (1 + abs(g0))):
            raise InversionFailure("value below g(s0)")
        resid = lambda z, yy: self.g(self.s0 + np.exp(z)) - yy
        flat = np.atleast_1d(y).ravel()
        out = np.full(flat.shape, self.s0)
        work = flat > g0
        if work.any():
            br = elementwise.bracket_root(resid, np.zeros(work.sum()), args=(flat[work],),
                                          maxiter=2000)
            if not np.all(br.success):
                raise InversionFailure("could not bracket g(s) = y")
            res = elementwise.find_root(resid, br.bracket, args=(flat[work],))
            if not np.all(res.success):
                raise InversionFailure("g inversion did not converge")
            out[work] = self.s0 + np.exp(res.x)
        return out.reshape(np.shape(y))

    def linear_constant(self, s_max: float = 1e6) -> float:
        """Largest C with g(s) >= C s on a log grid over [max(s0, 1e-3), s_max]."""
        s = np.geomspace(max(self.s0, 1e-3), s_max, 2000)
        return float(np.min(np.asarray(self.g(s), float) / s))


def exp_singular(g: ConvexGrowth, alpha: float | None, grid: Grid, center=None,
                 with_info: bool = False):
    """u0 = g^{-1}(alpha log(1/|x|)) inside |x| < r0 and s0 outside.

    r0 solves g^{-1}(alpha log(1/r0)) = s0; the node at the origin is
    evaluated half a cell away.
    """
    alpha = g.alpha if alpha is None else alpha
    if not alpha > 2:
        raise ConfigError("alpha must exceed 2")
    h = grid.spacing
    g0 = float(g.g(np.array(g.s0)))
    r0 = math.exp(-g0 / alpha)
    r = np.maximum(grid.radius(center), h / 2)
    inside = r < r0
    vals = np.full(grid.extents, float(g.s0))
    vals[inside] = np.maximum(g.inverse(alpha * np.log(1 / r[inside])), g.s0)
    u0 = GridField(grid, vals)
    if not with_info:
        return u0
    cap = float(g.inverse(np.array(alpha * math.log(2 / h))))
    return u0, {"profile": "exp_singular", "g": g.label, "alpha": alpha, "s0": g.s0,
                "r0": r0, "origin_cap": cap}


def default_kappa(A: float, r: float) -> float:
    """Log sharpening exponent making F(u0)^{-r} ~ |x|^{-N} log(1/|x|)^{-3}."""
    return 3.0 * (A - 1) / r


def power_singular(nl: NonlinearitySpec, r: float, N: int | None, grid: Grid,
                   kappa: float | None = None, s2: float | None = None, center=None,
                   with_info: bool = False):
    """u0 = max{F^{-1}(v0^{-1/(A-1)}), s2} with v0 = |x|^{-N(A-1)/r} log(1/|x|)^{-kappa}.

    The profile is used inside |x| < r_cut = exp(-(1 + kappa/a)), a = N(A-1)/r,
    where it is radially decreasing; u0 = s2 outside.
    """
    N = grid.dim if N is None else N
    A = nl.A_value
    if not A > 1:
        raise ConfigError("power_singular needs A > 1")
    if not r > 0:
        raise ConfigError("r must be positive")
    kappa = default_kappa(A, r) if kappa is None else kappa
    s2 = nl.s_threshold if s2 is None else s2
    a = N * (A - 1) / r
    r_cut = math.exp(-(1 + kappa / a))
    h = grid.spacing
    rad = np.maximum(grid.radius(center), h / 2)
    inside = rad < r_cut
    log_v0 = -a * np.log(rad[inside]) - kappa * np.log(np.log(1 / rad[inside]))
    vals = np.full(grid.extents, float(s2))
    try:
        top = nl.F_inv(np.exp(-log_v0 / (A - 1)))
    except Exception as exc:
        raise RangeError(f"F^{{-1}} failed on the profile: {exc}") from exc
    vals[inside] = np.maximum(top, s2)
    u0 = GridField(grid, vals)
    if not with_info:
        return u0
    return u0, {"profile": "power_singular", "nonlinearity": nl.name, "A": A, "r": r, "N": N,
                "kappa": kappa, "s2": s2, "r_cut": r_cut, "origin_cell": h / 2}


def integrability_trend(build: Callable[[Grid], GridField], grids, integrand: Callable,
                        rho: float) -> tuple[Trend, list]:
    """refine_trend of the uniformly local L^1 norm of integrand(u0) over grids."""
    levels = []
    for grid in grids:
        u0 = build(grid)
        levels.append((grid.spacing, uloc_norm(u0.map(integrand), UlocParams(1.0, rho))))
    return refine_trend(levels), levels


def power_singular_check(nl: NonlinearitySpec, r: float, grids, rho: float = 0.5,
                         r_strong: float | None = None, kappa: float | None = None) -> dict:
    """Trends of F(u0)^{-r} (should converge) and F(u0)^{-r_strong} (should diverge)."""
    r_strong = 1.25 * r if r_strong is None else r_strong
    build = lambda grid: power_singular(nl, r, None, grid, kappa=kappa)
    ok, lv_ok = integrability_trend(build, grids, lambda v: np.exp(-r * nl.log_F(v)), rho)
    bad, lv_bad = integrability_trend(build, grids, lambda v: np.exp(-r_strong * nl.log_F(v)), rho)
    return {"r": r, "trend": ok, "levels": lv_ok, "r_strong": r_strong,
            "strong_trend": bad, "strong_levels": lv_bad}
