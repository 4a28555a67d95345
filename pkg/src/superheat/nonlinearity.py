"""Source terms f, their structure function F(s) = int_s^inf du/f(u), and the constant A.

Every nonlinearity exposes vectorised ``f``, ``fprime``, ``F``, ``log_F``,
``F_inv`` and ``fprimeF``.  Built-in families use closed forms where they
exist; everything else goes through a cumulative Gauss-Legendre table in
the variable x = log s plus an analytic tail.
"""
from __future__ import annotations

import enum
import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator
from scipy.optimize import elementwise

from .errors import (ConfigError, NoBracket, NonConvergent, NonPositiveSource,
                     OutOfRange, TailDivergence)

log = logging.getLogger(__name__)

SQRT_PI = math.sqrt(math.pi)
DEFAULT_S_GRID = 2.0 ** np.arange(-10, 41)
SIDE_RUN = 9          # threshold point plus 8 further doublings
TOL_A = 1e-6

_GL_T, _GL_W = np.polynomial.legendre.leggauss(20)


class Side(enum.Flag):
    """Where f'(s)F(s) sits relative to A for large s."""
    BELOW = 1
    ABOVE = 2
    CONSTANT = 3
    MIXED = 4
    UNKNOWN = 8

    @property
    def label(self) -> str:
        return {Side.BELOW: "Below", Side.ABOVE: "Above", Side.CONSTANT: "Below&Above",
                Side.MIXED: "Mixed", Side.UNKNOWN: "Unknown"}[self]


def _arr(s):
    return np.asarray(s, dtype=float)


_X_TINY = math.log(np.finfo(float).tiny)


def _gauss_legendre(phi, a, b):
    """Integral of phi over [a, b] for arrays of endpoints (20-point rule)."""
    a = np.asarray(a, float)[..., None]
    b = np.asarray(b, float)[..., None]
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * _GL_T
    return np.sum(_GL_W * phi(x), axis=-1) * half[..., 0]


class _LogTable:
    """Cumulative integral of 1/f on an adaptive mesh in x = log s.

    ``tail(S)`` must return int_S^inf du/f(u); the table covers
    [x_lo, x_hi] and stores F at every mesh edge.
    """

    def __init__(self, f, tail, x_lo, x_hi, rtol=2e-13):
        self.f = f
        self.tail = tail
        self.x_lo = float(x_lo)
        self.x_hi = float(x_hi)
        n0 = max(1, int(math.ceil((x_hi - x_lo) / 0.5)))
        pending = np.linspace(x_lo, x_hi, n0 + 1)
        a, b = pending[:-1], pending[1:]
        F_hi = float(tail(math.exp(x_hi)))
        # rough mass above each cell sets an absolute error floor, so cells that
        # cannot matter at 1e-14 relative are not refined forever
        rough = _gauss_legendre(self.phi, a, b)
        above = F_hi + np.concatenate([np.cumsum(rough[::-1])[::-1][1:], [0.0]])
        done_a, done_b, done_v = [], [], []
        for _ in range(60):
            if a.size == 0:
                break
            m = 0.5 * (a + b)
            whole = _gauss_legendre(self.phi, a, b)
            split = _gauss_legendre(self.phi, a, m) + _gauss_legendre(self.phi, m, b)
            ok = (np.abs(whole - split) <= rtol * (np.abs(split) + above) + 1e-300) | (b - a < 1e-5)
            done_a.append(a[ok]); done_b.append(b[ok]); done_v.append(split[ok])
            bad = ~ok
            a, b = np.concatenate([a[bad], m[bad]]), np.concatenate([m[bad], b[bad]])
            above = np.concatenate([above[bad], above[bad]])
        if a.size:
            raise NonConvergent("structure-function table did not resolve the integrand")
        lo = np.concatenate(done_a)
        order = np.argsort(lo)
        self.edges = np.append(lo[order], x_hi)
        cells = np.concatenate(done_v)[order]
        # accumulate from the top so small values keep full relative accuracy
        self.cum = np.append(F_hi + np.cumsum(cells[::-1])[::-1], F_hi)

    def phi(self, x):
        s = np.exp(x)
        with np.errstate(over="ignore"):
            return s / self.f(s)

    def __call__(self, s):
        s = _arr(s)
        out = np.empty_like(s)
        with np.errstate(divide="ignore"):
            x = np.log(s)
        inside = (x >= self.x_lo) & (x <= self.x_hi)
        if inside.any():
            xi = x[inside]
            j = np.clip(np.searchsorted(self.edges, xi, side="right") - 1, 0, self.edges.size - 2)
            out[inside] = self.cum[j + 1] + _gauss_legendre(self.phi, xi, self.edges[j + 1])
        high = x > self.x_hi
        if high.any():
            out[high] = self.tail(s[high])
        low = ~(inside | high) & (s > 0)
        if low.any():
            out[low] = self.cum[0] + self._below(x[low])
        zero = s <= 0
        if zero.any():
            # int_0^{tiny} du/f is below roundoff once f(0) > 0
            f0 = float(self.f(np.array(0.0)))
            out[zero] = self.cum[0] + self._below(np.array([_X_TINY]))[0] if f0 > 0 else math.inf
        return out

    def _below(self, x):
        """int_{e^x}^{e^{x_lo}} du/f for x < x_lo, by the 20-point rule on unit pieces in x.

        Near zero 1/f can span hundreds of decades in s, but phi(x) = s/f(s)
        changes by a bounded factor per unit of x for power-like f.
        """
        n = np.ceil(self.x_lo - x).astype(int)
        owner = np.repeat(np.arange(x.size), n)
        start = np.concatenate([np.arange(k) for k in n]).astype(float)
        a = np.maximum(self.x_lo - start - 1.0, x[owner])
        b = self.x_lo - start
        with np.errstate(over="ignore"):
            pieces = _gauss_legendre(self.phi, a, b)
        return np.bincount(owner, weights=pieces, minlength=x.size)


class NonlinearitySpec:
    """Common interface; subclasses override the closed forms they know."""

    name = "nonlinearity"
    domain_floor = 0.0
    exact_A: float | None = None

    # -- primitives -----------------------------------------------------
    def f(self, s):
        raise NotImplementedError

    def fprime(self, s):
        raise NotImplementedError

    def F(self, s):
        raise NotImplementedError

    def log_F(self, s):
        with np.errstate(divide="ignore"):
            return np.log(self.F(s))

    def fprimeF(self, s):
        s = _arr(s)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return np.exp(np.log(self.fprime(s)) + self.log_F(s))

    @cached_property
    def F_sup(self) -> float:
        """F at the domain floor (the supremum of the range of F)."""
        if not np.isfinite(self.domain_floor):
            return math.inf
        with np.errstate(divide="ignore"):
            if float(self.f(np.array(self.domain_floor))) == 0.0:
                return math.inf
        return float(self.F(np.array(self.domain_floor)))

    def F_inv(self, y):
        y = _arr(y)
        self._check_range(y)
        with np.errstate(divide="ignore"):
            return self.F_inv_log(np.log(y))

    def F_inv_log(self, log_y):
        """F^{-1}(exp(log_y)), usable where F itself under- or overflows."""
        log_y = _arr(log_y)
        if np.any(np.isnan(log_y)):
            raise OutOfRange("F^{-1} needs a positive argument")
        top = math.log(self.F_sup) if math.isfinite(self.F_sup) else math.inf
        if np.any(log_y > top + 1e-12):
            raise OutOfRange(f"argument exceeds F at the domain floor ({self.F_sup:.17g})")
        out = np.full(log_y.shape, np.nan)
        at_top = log_y >= top
        out[at_top] = self.domain_floor
        out[log_y == -math.inf] = math.inf
        work = ~at_top & np.isfinite(log_y)
        if work.any():
            out[work] = self._invert(log_y[work])
        return out

    def _check_range(self, y):
        if np.any(y < 0) or np.any(np.isnan(y)):
            raise OutOfRange("F^{-1} needs a positive argument")
        if np.any(y > self.F_sup * (1 + 1e-12)):
            raise OutOfRange(f"argument exceeds F at the domain floor ({self.F_sup:.17g})")

    def _invert(self, logy):
        """Bracketing inversion in z = log(s - floor) (or z = s on the real line)."""
        floor = self.domain_floor
        if np.isfinite(floor):
            to_s = lambda z: floor + np.exp(z)
        else:
            to_s = lambda z: z

        def resid(z, ly):
            return self.log_F(to_s(z)) - ly

        br = elementwise.bracket_root(resid, np.zeros_like(logy), np.ones_like(logy),
                                      args=(logy,), maxiter=2000)
        if not np.all(br.success):
            raise NoBracket("could not bracket F(s) = y")
        res = elementwise.find_root(resid, br.bracket, args=(logy,))
        if not np.all(res.success):
            raise NonConvergent("F^{-1} root finding failed")
        return to_s(res.x)

    # -- derived metadata ------------------------------------------------
    @cached_property
    def analysis(self) -> "AEstimate":
        return estimate_A(self)

    @property
    def A_value(self) -> float:
        return self.analysis.A_hat

    @property
    def side(self) -> Side:
        return self.analysis.side

    @property
    def s_threshold(self) -> float:
        return self.analysis.s_threshold

    def __repr__(self):
        return self.name


@dataclass(frozen=True, repr=False, eq=True)
class Power(NonlinearitySpec):
    """f(u) = c u^p; the coefficient c only rescales F."""

    p: float
    coef: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError("power(p) needs p > 1")
        if not self.coef > 0:
            raise ConfigError("power coefficient must be positive")

    @property
    def name(self):
        if self.coef == 1.0:
            return f"power({self.p:g})"
        return f"{self.coef:g}*power({self.p:g})"

    @property
    def exact_A(self):
        return self.p / (self.p - 1)

    def f(self, s):
        return self.coef * _arr(s) ** self.p

    def fprime(self, s):
        return self.coef * self.p * _arr(s) ** (self.p - 1)

    def F(self, s):
        with np.errstate(divide="ignore"):
            return _arr(s) ** (1 - self.p) / (self.coef * (self.p - 1))

    def log_F(self, s):
        with np.errstate(divide="ignore"):
            return (1 - self.p) * np.log(_arr(s)) - math.log(self.coef * (self.p - 1))

    def F_inv(self, y):
        y = _arr(y)
        self._check_range(y)
        with np.errstate(divide="ignore"):
            return (self.coef * (self.p - 1) * y) ** (-1.0 / (self.p - 1))

    def F_inv_log(self, log_y):
        return np.exp(-(_arr(log_y) + math.log(self.coef * (self.p - 1))) / (self.p - 1))

    def fprimeF(self, s):
        return np.full(np.shape(s), self.p / (self.p - 1))


@dataclass(frozen=True, repr=False, eq=True)
class ShiftedPower(NonlinearitySpec):
    """f(u) = c (u + shift)^p; f'F is exactly p/(p-1) and F(0) is finite.

    Used as a comparison function: 2(1+s)^p dominates s^p + s^q for p > q.
    """

    p: float
    coef: float = 1.0
    shift: float = 1.0

    def __post_init__(self):
        if not (self.p > 1 and self.coef > 0 and self.shift > 0):
            raise ConfigError("shifted power needs p > 1, coef > 0, shift > 0")

    @property
    def name(self):
        return f"{self.coef:g}*(s+{self.shift:g})^{self.p:g}"

    @property
    def exact_A(self):
        return self.p / (self.p - 1)

    def f(self, s):
        return self.coef * (_arr(s) + self.shift) ** self.p

    def fprime(self, s):
        return self.coef * self.p * (_arr(s) + self.shift) ** (self.p - 1)

    def F(self, s):
        return (_arr(s) + self.shift) ** (1 - self.p) / (self.coef * (self.p - 1))

    def log_F(self, s):
        return (1 - self.p) * np.log(_arr(s) + self.shift) - math.log(self.coef * (self.p - 1))

    def F_inv(self, y):
        y = _arr(y)
        self._check_range(y)
        with np.errstate(divide="ignore"):
            return (self.coef * (self.p - 1) * y) ** (-1.0 / (self.p - 1)) - self.shift

    def F_inv_log(self, log_y):
        s = np.exp(-(_arr(log_y) + math.log(self.coef * (self.p - 1))) / (self.p - 1))
        return s - self.shift

    def fprimeF(self, s):
        return np.full(np.shape(s), self.p / (self.p - 1))


@dataclass(frozen=True, repr=False)
class Exponential(NonlinearitySpec):
    """f(u) = e^u.  F = e^{-s} is defined on the whole real line."""

    name = "exp"
    domain_floor = -math.inf
    exact_A = 1.0

    def f(self, s):
        return np.exp(_arr(s))

    fprime = f

    def F(self, s):
        return np.exp(-_arr(s))

    def log_F(self, s):
        return -_arr(s)

    def F_inv(self, y):
        y = _arr(y)
        self._check_range(y)
        with np.errstate(divide="ignore"):
            return -np.log(y)

    def F_inv_log(self, log_y):
        return -_arr(log_y)

    def fprimeF(self, s):
        return np.ones(np.shape(s))


@dataclass(frozen=True, repr=False)
class ExpSquare(NonlinearitySpec):
    """f(u) = exp(u^2) on [0, inf); F(s) = (sqrt(pi)/2) erfc(s)."""

    name = "expsq"
    exact_A = 1.0

    def f(self, s):
        with np.errstate(over="ignore"):
            return np.exp(_arr(s) ** 2)

    def fprime(self, s):
        s = _arr(s)
        with np.errstate(over="ignore", invalid="ignore"):
            return 2 * s * np.exp(s ** 2)

    def F(self, s):
        return 0.5 * SQRT_PI * special.erfc(_arr(s))

    def log_F(self, s):
        s = _arr(s)
        return math.log(0.5 * SQRT_PI) + np.log(special.erfcx(s)) - s ** 2

    def fprimeF(self, s):
        s = _arr(s)
        return SQRT_PI * s * special.erfcx(s)


@dataclass(frozen=True, repr=False)
class PowerSum(NonlinearitySpec):
    """f(u) = u^p + u^q with p > q > 1."""

    p: float
    q: float

    def __post_init__(self):
        if not (self.p > self.q > 1):
            raise ConfigError("powersum(p,q) needs p > q > 1")

    @property
    def name(self):
        return f"powersum({self.p:g},{self.q:g})"

    @property
    def exact_A(self):
        return self.p / (self.p - 1)

    def f(self, s):
        s = _arr(s)
        with np.errstate(over="ignore"):
            return s ** self.p + s ** self.q

    def fprime(self, s):
        s = _arr(s)
        with np.errstate(over="ignore"):
            return self.p * s ** (self.p - 1) + self.q * s ** (self.q - 1)

    @cached_property
    def _s_tail(self) -> float:
        # beyond this point (u^{q-p} <= 1/4) the alternating series converges fast
        return 4.0 ** (1.0 / (self.p - self.q))

    def _tail(self, S):
        """int_S^inf u^{-p} (1 + u^{q-p})^{-1} du as an alternating series."""
        S = _arr(S)
        k = np.arange(0, 80)
        expo = 1 - self.p - k * (self.p - self.q)
        terms = (-1.0) ** k * S[..., None] ** expo / (self.p - 1 + k * (self.p - self.q))
        return terms.sum(axis=-1)

    @cached_property
    def _table(self) -> _LogTable:
        phi_f = lambda s: s ** self.p + s ** self.q
        return _LogTable(phi_f, self._tail, math.log(1e-10), math.log(self._s_tail))

    def F(self, s):
        return self._table(s)


@dataclass(frozen=True, repr=False, eq=False)
class Custom(NonlinearitySpec):
    """User-supplied f and f' (both vectorised callables).

    F is a quadrature table up to an adaptively chosen S_tail followed by the
    local-law tail estimate 1/(f'(S) - f(S)/S), exact for pure powers and
    accurate to O(1/S) for exponential growth.
    """

    f_fn: Callable
    fprime_fn: Callable
    domain_floor: float = 0.0
    label: str = "custom"

    def __post_init__(self):
        if not self.domain_floor >= 0:
            raise ConfigError("custom domain_floor must be >= 0")

    @property
    def name(self):
        return self.label

    def f(self, s):
        with np.errstate(over="ignore"):
            return np.asarray(self.f_fn(_arr(s)), float) * np.ones(np.shape(s))

    def fprime(self, s):
        with np.errstate(over="ignore"):
            return np.asarray(self.fprime_fn(_arr(s)), float) * np.ones(np.shape(s))

    def _tail(self, S):
        S = _arr(S)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            fs, dfs = self.f(S), self.fprime(S)
            denom = dfs - fs / S
            out = np.where(np.isinf(fs), 0.0, 1.0 / denom)
        if np.any(~np.isinf(fs) & (denom <= 0)):
            raise TailDivergence("local growth exponent <= 1: f is not superlinear at the tail")
        return out

    @cached_property
    def _table(self) -> _LogTable:
        floor = self.domain_floor
        s_lo = max(floor * (1 + 1e-12), 1e-12) if floor > 0 else 1e-12
        x_lo = math.log(s_lo)
        s_ref = max(1.0, 2 * s_lo)
        grid = s_ref * 2.0 ** np.arange(0, 1000)
        grid = grid[grid < 1e300]
        with np.errstate(over="ignore", invalid="ignore"):
            fv = self.f(grid)
            dfv = self.fprime(grid)
        finite = np.isfinite(fv) & np.isfinite(dfv)
        if np.any(fv[finite] <= 0) or np.any(dfv[finite] <= 0):
            raise NonPositiveSource("sampled f or f' is not positive")
        # run the table out to the last finite sample so that F keeps full
        # relative accuracy far beyond the point where the tail is negligible
        last = int(np.argmin(finite)) - 1 if not finite.all() else grid.size - 1
        if last < 1:
            raise TailDivergence("f overflows immediately above the reference point")
        grid, fv = grid[: last + 1], fv[: last + 1]
        if last + 1 < finite.size:
            # push the end point towards the overflow edge
            lo, hi = grid[-1], 2 * grid[-1]
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                with np.errstate(over="ignore", invalid="ignore"):
                    ok = np.isfinite(self.f(mid)) and np.isfinite(self.fprime(mid))
                lo, hi = (mid, hi) if ok else (lo, mid)
            grid = np.append(grid, 0.999 * lo)
            fv = np.append(fv, self.f(grid[-1]))
        xs = np.log(grid)
        phi = grid / fv
        partial = float(np.sum(0.5 * (phi[1:] + phi[:-1]) * np.diff(xs)))
        x_hi = float(xs[-1])
        tail = float(self._tail(np.exp(x_hi)))
        if tail > 1e-12 * partial:
            log.warning("%s: tail estimate %.3g is not negligible against %.3g", self.label,
                        tail, partial)
        table = _LogTable(self.f, self._tail, x_lo, x_hi)
        edge_vals = self.f(np.exp(table.edges))
        if np.any(edge_vals <= 0) or np.any(self.fprime(np.exp(table.edges)) <= 0):
            raise NonPositiveSource("sampled f or f' is not positive")
        return table

    @cached_property
    def s_reliable(self) -> float:
        """Largest sample where the tail estimate is below 1e-12 of F."""
        t = self._table
        edges = np.exp(t.edges)
        ok = t.cum[-1] <= 1e-12 * t.cum
        return float(edges[ok][-1]) if ok.any() else float(edges[0])

    def F(self, s):
        s = _arr(s)
        if np.any(s < self.domain_floor):
            raise OutOfRange("F evaluated below the domain floor")
        out = np.empty_like(s)
        pos = s > 0
        out[pos] = self._table(s[pos])
        if (~pos).any():
            # s == 0 with f(0) > 0: F(0) = F(s_lo) + int_0^{s_lo} du/f
            s_lo = math.exp(self._table.x_lo)
            extra, _ = integrate.quad(lambda u: 1.0 / float(self.f(np.array(u))), 0.0, s_lo)
            f0 = float(self.f(np.array(0.0)))
            out[~pos] = self._table.cum[0] + extra if f0 > 0 else math.inf
        return out

    @classmethod
    def from_csv(cls, path, label=None) -> "Custom":
        """Build from a CSV table with columns s, f, fprime (header optional)."""
        data = np.genfromtxt(path, delimiter=",", comments="#")
        if data.ndim != 2 or data.shape[1] < 3:
            raise ConfigError(f"{path}: expected three columns s,f,fprime")
        data = data[~np.isnan(data).any(axis=1)]
        return cls.from_samples(data[:, 0], data[:, 1], data[:, 2], label=label or f"table({path})")

    @classmethod
    def from_samples(cls, s, f, fp, label="table") -> "Custom":
        s, f, fp = map(lambda a: np.asarray(a, float), (s, f, fp))
        if np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise ConfigError("table abscissae must be positive and increasing")
        if np.any(f <= 0) or np.any(fp <= 0):
            raise NonPositiveSource("table contains non-positive f or f'")
        ls = np.log(s)
        lf = PchipInterpolator(ls, np.log(f), extrapolate=False)
        lfp = PchipInterpolator(ls, np.log(fp), extrapolate=False)
        # local laws at the ends, chosen by which one reproduces the supplied f'
        a_lo = math.log(f[1] / f[0]) / math.log(s[1] / s[0])
        a_hi = math.log(f[-1] / f[-2]) / math.log(s[-1] / s[-2])
        b_hi = math.log(f[-1] / f[-2]) / (s[-1] - s[-2])
        power_err = abs(a_hi * f[-1] / s[-1] - fp[-1])
        expo_err = abs(b_hi * f[-1] - fp[-1])
        use_power = power_err <= expo_err

        def _eval(x, which):
            x = _arr(x)
            out = np.empty_like(x)
            with np.errstate(divide="ignore", over="ignore"):
                lx = np.log(x)
                mid = (x >= s[0]) & (x <= s[-1])
                out[mid] = np.exp((lf if which == 0 else lfp)(lx[mid]))
                lo = x < s[0]
                base = f[0] if which == 0 else fp[0]
                out[lo] = base * (x[lo] / s[0]) ** (a_lo - which)
                hi = x > s[-1]
                if use_power:
                    base = f[-1] if which == 0 else fp[-1]
                    out[hi] = base * (x[hi] / s[-1]) ** (a_hi - which)
                else:
                    base = f[-1] if which == 0 else fp[-1]
                    out[hi] = base * np.exp(b_hi * (x[hi] - s[-1]))
            return out

        return cls(lambda x: _eval(x, 0), lambda x: _eval(x, 1), 0.0, label)


# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class AEstimate:
    A_hat: float
    side: Side
    s_threshold: float
    s_grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    A_numeric: float = math.nan
    heuristic: bool = True

    def __iter__(self) -> Iterator:
        return iter((self.A_hat, self.side))


def _extrapolate(a: np.ndarray) -> tuple[float, float]:
    """Limit of an algebraically converging sequence (Aitken on the tail)."""
    scale = max(1.0, abs(a[-1]))
    d = np.diff(a)
    significant = np.nonzero(np.abs(d) > 1e-12 * scale)[0]
    if significant.size == 0:
        return float(a[-1]), 0.0
    m = significant[-1]
    if m <= d.size - 4:
        # settled below rounding level for several doublings
        tail = a[m + 2:]
        return float(tail.mean()), float(np.ptp(tail))
    # iterated Aitken on the significant tail handles several algebraic rates
    seq = a[max(0, m - 10): m + 2]
    best = None
    while seq.size >= 3:
        d1 = np.diff(seq)
        d2 = np.diff(d1)
        keep = d2 != 0
        seq = (seq[2:] - d1[1:] ** 2 / np.where(keep, d2, 1.0))[keep]
        if seq.size >= 2:
            spread = abs(seq[-1] - seq[-2])
            if best is None or spread < best[1]:
                best = (float(seq[-1]), float(spread))
    if best is None:
        raise NonConvergent("not enough points to extrapolate f'F")
    if best[1] > TOL_A:
        raise NonConvergent(f"successive tail estimates of A differ by {best[1]:.3g}")
    return best


def _tail_start(mask: np.ndarray):
    if not mask[-1]:
        return None
    bad = np.nonzero(~mask)[0]
    return 0 if bad.size == 0 else int(bad[-1]) + 1


def detect_side(s_grid, values, A, tol):
    """Side of f'F relative to A on the stable tail of the grid, and its onset."""
    values = np.asarray(values)
    n = values.size
    if n < SIDE_RUN:
        return Side.UNKNOWN, float(s_grid[-1])
    ib = _tail_start(values <= A + tol)
    ia = _tail_start(values >= A - tol)
    okb = ib is not None and n - ib >= SIDE_RUN
    oka = ia is not None and n - ia >= SIDE_RUN
    if okb and oka:
        if ib == ia:
            return Side.CONSTANT, float(s_grid[ib])
        return (Side.BELOW, float(s_grid[ib])) if ib < ia else (Side.ABOVE, float(s_grid[ia]))
    if okb:
        return Side.BELOW, float(s_grid[ib])
    if oka:
        return Side.ABOVE, float(s_grid[ia])
    return Side.MIXED, float(s_grid[-1])


def estimate_A(nl: NonlinearitySpec, s_grid=None) -> AEstimate:
    """Limit A of f'(s)F(s) along a geometric grid, and the side of approach.

    Built-in families return their exact A; the numeric estimate is still
    computed and must agree within 1e-6.
    """
    default = s_grid is None
    s_grid = DEFAULT_S_GRID if default else np.asarray(s_grid, float)
    if np.any(np.diff(s_grid) <= 0):
        raise ConfigError("s_grid must be strictly increasing")
    if np.isfinite(nl.domain_floor):
        s_grid = s_grid[s_grid > nl.domain_floor]
    s_grid = s_grid[s_grid <= getattr(nl, "s_reliable", math.inf)]
    values = nl.fprimeF(s_grid)
    good = np.isfinite(values)
    if not good.all():
        # overflow of f at the far end of the grid: keep the finite prefix
        stop = int(np.argmin(good))
        s_grid, values = s_grid[:stop], values[:stop]
    if default and s_grid[-1] < 1e4:
        # growth too fast for the doubling grid to reach 1e4: use quarter-doublings
        dense = 2.0 ** (np.arange(-40, 4 * math.log2(s_grid[-1]) + 1) / 4)
        return estimate_A(nl, dense[dense <= s_grid[-1]])
    if s_grid.size < 3:
        raise NonConvergent("too few finite samples of f'F")
    A_num, err = _extrapolate(values)
    if nl.exact_A is not None:
        A = float(nl.exact_A)
        if abs(A_num - A) > TOL_A:
            raise NonConvergent(f"numeric A {A_num:.12g} disagrees with closed form {A:.12g}")
        tol = 1e-13 * A
    else:
        A = A_num
        tol = max(1e-10 * A, 10 * err)
    side, s_thr = detect_side(s_grid, values, A, tol)
    return AEstimate(A, side, s_thr, s_grid, values, A_num)


@dataclass(frozen=True)
class ProfileSample:
    s: float
    f_val: float
    fprime_val: float
    F_val: float
    Finv_of_F: float
    fprimeF: float


def profile(nl: NonlinearitySpec, s: float) -> ProfileSample:
    s_arr = np.array(float(s))
    F_val = float(nl.F(s_arr))
    return ProfileSample(float(s), float(nl.f(s_arr)), float(nl.fprime(s_arr)), F_val,
                         float(nl.F_inv(np.array(F_val))), float(nl.fprimeF(s_arr)))


def eval_F(nl: NonlinearitySpec, s):
    s = _arr(s)
    if np.isfinite(nl.domain_floor) and np.any(s < nl.domain_floor):
        raise OutOfRange("F evaluated below the domain floor")
    out = nl.F(s)
    return float(out) if out.ndim == 0 else out


def eval_F_inv(nl: NonlinearitySpec, y):
    out = nl.F_inv(_arr(y))
    return float(out) if np.ndim(out) == 0 else out


_NAME_RE = re.compile(r"^\s*(\w+)\s*(?:\(([^)]*)\))?\s*$")


def parse_nonlinearity(text: str) -> NonlinearitySpec:
    """Parse "power(p)", "powersum(p,q)", "exp", "expsq" or "table(path.csv)"."""
    m = _NAME_RE.match(text)
    if not m:
        raise ConfigError(f"cannot parse nonlinearity {text!r}")
    kind, args = m.group(1).lower(), m.group(2)
    try:
        if kind == "power":
            return Power(float(args))
        if kind == "powersum":
            p, q = (float(a) for a in args.split(","))
            return PowerSum(p, q)
        if kind == "exp" and not args:
            return Exponential()
        if kind == "expsq" and not args:
            return ExpSquare()
        if kind == "table":
            return Custom.from_csv(args.strip())
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad arguments in {text!r}: {exc}") from exc
    raise ConfigError(f"unknown nonlinearity {text!r}")
