"""Solvers for u_t = Δu + f(u) and the nonexistence certificate.

All blow-up findings are numerical evidence at the grid and step sizes used,
never a proof of nonexistence in the continuum.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (BlowupDetected, ConfigError, CriticalExponent, NotApplicable)
from .heatkernel import apply_semigroup, propagator
from .nonlinearity import Exponential, NonlinearitySpec, Power, Side
from .singular import ConvexGrowth
from .transforms import SpaceTimeField, cole_hopf_u, cole_hopf_v, log_transform, log_transform_inv
from .uloc_grid import ConstantExtension, GridField, Periodic, UlocParams, uloc_norm

log = logging.getLogger(__name__)

EVIDENCE = "numerical evidence at resolution (h, dt); not a continuum statement"
MONOTONE_TOL = 1e-10
RESIDUAL_TOL = 1e-6
INCREMENT_MAX = 0.10


@dataclass(frozen=True)
class EvolveConfig:
    T: float
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    blowup_cap: float = 1e8
    quadrature: str = "trapezoid"      # or "left"
    max_picard: int = 64
    n_frames: int = 50
    picard_tol: float = 1e-8

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if not 0 < self.dt_min < self.dt_init:
            raise ConfigError("need 0 < dt_min < dt_init")
        if self.quadrature not in ("trapezoid", "left"):
            raise ConfigError("quadrature must be 'trapezoid' or 'left'")
        if self.max_picard < 2 or self.n_frames < 1:
            raise ConfigError("max_picard >= 2 and n_frames >= 1 required")

    def check_data(self, u0: GridField):
        if np.any(u0.values < 0):
            raise ConfigError("initial data must be nonnegative")
        if not self.blowup_cap > float(np.abs(u0.values).max()):
            raise ConfigError("blowup_cap must exceed the initial maximum")


def _far_value(u: GridField) -> Optional[float]:
    return u.boundary.value if isinstance(u.boundary, ConstantExtension) else None


def _frames(u0: GridField, stack, far, times) -> SpaceTimeField:
    grid = u0.grid
    out = []
    for k, vals in enumerate(stack):
        b = grid.boundary if far is None else ConstantExtension(float(far[k]))
        out.append(u0.with_values(vals, b))
    return SpaceTimeField(tuple(out), tuple(times))


# ---------------------------------------------------------------------------
# monotone Picard iteration

@dataclass
class PicardState:
    iterates: list                  # SpaceTimeField per iterate, u_1 = 0 first
    monotone_flags: list            # u_{n+1} >= u_n - tol, per step
    sup_gap: float                  # max of u_{n+1} - u_n at the final time
    gaps: list = field(default_factory=list)
    status: str = "Converged"       # or "SlowConvergence", "Stalled"
    dt: float = math.nan

    @property
    def limit(self) -> SpaceTimeField:
        return self.iterates[-1]


def picard_monotone(u0: GridField, nl: NonlinearitySpec, cfg: EvolveConfig,
                    keep_iterates: bool = False) -> PicardState:
    """u_{n+1}(t) = e^{tΔ}u0 + ∫_0^t e^{(t-s)Δ} f(u_n(s)) ds from u_1 = 0.

    The Duhamel integral uses a uniform step dt = T/K (K = ceil(T/dt_init),
    rounded up to a multiple of n_frames) and the O(K) recursion
    I_{k+1} = e^{dtΔ}(I_k + dt/2 f_k) + dt/2 f_{k+1} (trapezoid) or
    I_{k+1} = e^{dtΔ}(I_k + dt f_k) (left rectangle).
    """
    cfg.check_data(u0)
    n_frames = cfg.n_frames
    K = int(math.ceil(cfg.T / cfg.dt_init / n_frames)) * n_frames
    dt = cfg.T / K
    stride = K // n_frames
    times = dt * np.arange(K + 1)
    heat = propagator(u0.grid, dt)
    b0 = _far_value(u0)
    shape = (K + 1,) + u0.extents
    trap = cfg.quadrature == "trapezoid"

    prev = np.zeros(shape)
    prev_far = None if b0 is None else np.zeros(K + 1)
    iterates = [_frames(u0, prev[::stride], None if b0 is None else prev_far[::stride],
                        times[::stride])]
    flags, gaps = [], []
    status = "SlowConvergence"
    for n in range(1, cfg.max_picard):
        fprev = nl.f(prev)
        cur = np.empty(shape)
        cur[0] = u0.values
        far = None
        if b0 is not None:
            ffar = nl.f(prev_far)
            far = np.empty(K + 1)
            far[0] = b0
        for k in range(K):
            b_k = None if far is None else far[k]
            if trap:
                cur[k + 1] = heat(cur[k] + 0.5 * dt * fprev[k], b_k if b_k is None
                                  else b_k + 0.5 * dt * ffar[k]) + 0.5 * dt * fprev[k + 1]
                if far is not None:
                    far[k + 1] = far[k] + 0.5 * dt * (ffar[k] + ffar[k + 1])
            else:
                cur[k + 1] = heat(cur[k] + dt * fprev[k], b_k if b_k is None
                                  else b_k + dt * ffar[k])
                if far is not None:
                    far[k + 1] = far[k] + dt * ffar[k]
            peak = cur[k + 1].max()
            if not np.isfinite(peak) or peak > cfg.blowup_cap:
                bad = np.unravel_index(np.nanargmax(np.where(np.isfinite(cur[k + 1]),
                                                             cur[k + 1], np.inf)), u0.extents)
                pos = tuple(o + i * u0.spacing for o, i in zip(u0.origin, bad))
                raise BlowupDetected(f"Picard iterate {n + 1} exceeds the cap at t={times[k + 1]:.6g}, "
                                     f"x={pos} ({EVIDENCE})", bad, float(times[k + 1]), n + 1)
        scale = 1 + float(np.abs(cur).max())
        flags.append(bool(np.all(cur >= prev - MONOTONE_TOL * scale)))
        gap = float(np.max(cur[-1] - prev[-1]))
        gaps.append(gap)
        prev, prev_far = cur, far
        if keep_iterates:
            iterates.append(_frames(u0, cur[::stride], None if far is None else far[::stride],
                                    times[::stride]))
        if gap < cfg.picard_tol * (1 + float(cur[-1].max())):
            status = "Converged"
            break
    else:
        shrinking = len(gaps) >= 3 and gaps[-1] < gaps[-2] < gaps[-3]
        status = "SlowConvergence" if shrinking else "Stalled"
    if not keep_iterates:
        iterates.append(_frames(u0, prev[::stride], None if prev_far is None else prev_far[::stride],
                                times[::stride]))
    return PicardState(iterates, flags, gaps[-1], gaps, status, dt)


# ---------------------------------------------------------------------------
# split-step integrator

@dataclass
class BlowupReport:
    time: float                 # estimated blow-up time t_last + F(M_last)
    t_last: float
    max_value: float
    location: tuple
    growth_exponent: float      # slope of log M against log(T* - t)
    reason: str                 # "cap" or "dt_min"
    frames: Optional[SpaceTimeField]
    note: str = EVIDENCE

    def summary(self) -> dict:
        return {"blowup_time": self.time, "t_last": self.t_last, "max_value": self.max_value,
                "location": list(self.location), "growth_exponent": self.growth_exponent,
                "reason": self.reason, "note": self.note}


def imex_evolve(u0: GridField, nl: NonlinearitySpec, cfg: EvolveConfig):
    """Strang splitting: exact heat half steps around a Heun step for the source.

    The step halves whenever the relative increment exceeds 10% and grows
    back towards dt_init once increments are small.  Frames are stored at
    n_frames + 1 uniform output times.  Returns a SpaceTimeField, or a
    BlowupReport once max u passes blowup_cap or dt falls below dt_min.
    """
    cfg.check_data(u0)
    out_times = np.linspace(0.0, cfg.T, cfg.n_frames + 1)
    u = np.array(u0.values)
    far = _far_value(u0)
    t, dt = 0.0, cfg.dt_init
    stack, fars = [u.copy()], [far]
    history = [(0.0, float(u.max()))]
    heat_cache = {}

    def half_heat(v, b, step):
        key = 0.5 * step
        if key not in heat_cache:
            if len(heat_cache) > 32:
                heat_cache.clear()
            heat_cache[key] = propagator(u0.grid, key)
        return heat_cache[key](v, b)

    def source_step(v, step):
        k1 = nl.f(v)
        k2 = nl.f(v + step * k1)
        return v + 0.5 * step * (k1 + k2)

    def blowup(reason):
        M = float(u.max())
        t_star = float(t + float(nl.F(np.array(M))))
        loc_idx = np.unravel_index(int(np.argmax(u)), u0.extents)
        loc = tuple(float(o + i * u0.spacing) for o, i in zip(u0.origin, loc_idx))
        hist = np.array(history[-40:])
        gap = t_star - hist[:, 0]
        ok = (gap > 0) & (hist[:, 1] > 0)
        expo = (float(np.polyfit(np.log(gap[ok]), np.log(hist[ok, 1]), 1)[0])
                if ok.sum() >= 3 else math.nan)
        frames = _frames(u0, stack, None if far is None else fars, out_times[:len(stack)]) \
            if len(stack) >= 1 else None
        return BlowupReport(t_star, float(t), M, loc, expo, reason, frames)

    next_out = 1
    while next_out <= cfg.n_frames:
        target = out_times[next_out]
        step = min(dt, target - t)
        half = half_heat(u, far, step)
        far_half = far
        trial = half_heat(source_step(half, step), far_half, step)
        far_trial = None if far is None else float(source_step(np.array(far), step))
        scale = max(float(np.abs(u).max()), 1e-300)
        incr = float(np.abs(trial - u).max()) / scale if np.all(np.isfinite(trial)) else math.inf
        if incr > INCREMENT_MAX:
            dt = 0.5 * step
            if dt < cfg.dt_min:
                return blowup("dt_min")
            continue
        u, far, t = trial, far_trial, (target if step == target - t else t + step)
        history.append((t, float(u.max())))
        if float(u.max()) > cfg.blowup_cap:
            return blowup("cap")
        if incr < 0.25 * INCREMENT_MAX and dt < cfg.dt_init:
            dt = min(2 * dt, cfg.dt_init)
        if t == target:
            stack.append(u.copy())
            fars.append(far)
            next_out += 1
    return _frames(u0, stack, None if far is None else fars, out_times)


# ---------------------------------------------------------------------------
# supersolutions through the Cole-Hopf type transforms

@dataclass
class SupersolutionResult:
    field: SpaceTimeField           # the supersolution ū
    aux: SpaceTimeField             # v (A > 1) or w (A = 1)
    residual_field: GridField       # min over interior frames of ū_t - Δū - f(ū)
    min_residual: float
    verified: bool
    A: float
    s1: float
    branch: str


def _spectral_laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Laplacian of each frame (axis 0 indexes frames) by FFT."""
    shape = values.shape[1:]
    k2 = sum(k ** 2 for k in np.meshgrid(*[2 * np.pi * np.fft.fftfreq(n, d=h) for n in shape],
                                         indexing="ij", sparse=True))
    axes = tuple(range(1, values.ndim))
    return np.real(np.fft.ifftn(-k2 * np.fft.fftn(values, axes=axes), axes=axes))


def _fd_laplacian(values: np.ndarray, h: float, far) -> np.ndarray:
    out = np.zeros_like(values)
    for ax in range(1, values.ndim):
        n = values.shape[ax]
        widths = [(0, 0)] * values.ndim
        widths[ax] = (1, 1)
        p = np.pad(values, widths, mode="edge")
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[ax], hi[ax] = 0, n + 1
        for k in range(values.shape[0]):
            p[(k,) + tuple(lo[1:])] = far[k]
            p[(k,) + tuple(hi[1:])] = far[k]
        out += (np.take(p, range(2, n + 2), ax) - 2 * values + np.take(p, range(0, n), ax)) / h ** 2
    return out


def _dt4(stack: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order centred time derivative on frames 2..n-3 (NaN elsewhere)."""
    out = np.full_like(stack, np.nan)
    out[2:-2] = (stack[:-4] - 8 * stack[1:-3] + 8 * stack[3:-1] - stack[4:]) / (12 * dt)
    return out


def supersolution_residual(ubar: SpaceTimeField, nl: NonlinearitySpec):
    """ū_t - Δū - f(ū) on interior frames; spectral Laplacian on periodic grids."""
    stack = ubar.stack()
    times = np.asarray(ubar.times)
    if len(times) < 5:
        raise ConfigError("supersolution check needs at least five frames")
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9):
        raise ConfigError("supersolution check needs uniform frames")
    h = ubar.grid.spacing
    if isinstance(ubar.grid.boundary, Periodic):
        lap = _spectral_laplacian(stack, h)
    else:
        lap = _fd_laplacian(stack, h, [fr.boundary.value for fr in ubar.frames])
    res = _dt4(stack, dts[0]) - lap - nl.f(stack)
    inner = res[2:-2]
    if not isinstance(ubar.grid.boundary, Periodic):
        sl = (slice(None),) + tuple(slice(1, -1) for _ in ubar.grid.extents)
        inner = inner[sl]
    return res, float(inner.min())


def smooth_max(a, b, delta: float):
    """(a + b + sqrt((a-b)^2 + delta^2)) / 2, a smooth upper envelope of max(a, b)."""
    if delta == 0:
        return np.maximum(a, b)
    return 0.5 * (a + b + np.hypot(a - b, delta))


def build_supersolution(u0: GridField, nl: NonlinearitySpec, cfg: EvolveConfig,
                        s1: float | None = None, smoothing: float = 0.1) -> SupersolutionResult:
    """Supersolution from the power model (A > 1) or the exponential model (A = 1).

    A > 1: v0 = max{F(u0)^{-(A-1)}, F(s1)^{-(A-1)}}, v_t = Δv + (A-1)v^{A/(A-1)},
    ū = F^{-1}(v^{-1/(A-1)}).  A = 1: w0 = max{-log F(u0), -log F(s1)},
    w_t = Δw + e^w, ū = F^{-1}(e^{-w}).

    The max is taken through ``smooth_max`` with width ``smoothing`` times the
    floor value (absolute width for the A = 1 branch), which keeps the initial
    value above both arguments while removing the corner whose t^{-1/2} time
    behaviour frame differences cannot resolve.  ``smoothing=0`` gives the
    plain max.
    """
    if not (nl.side & Side.BELOW):
        raise NotApplicable(f"{nl.name}: f'F is not below A for large s (side {nl.side.label})")
    A = nl.A_value
    s1 = nl.s_threshold if s1 is None else s1
    if A - 1 > 1e-6:
        branch = "power"
        floor = float(np.exp(-(A - 1) * nl.log_F(np.array(s1))))
        v = cole_hopf_v(u0, nl, A)
        aux0 = v.map(lambda x: smooth_max(x, floor, smoothing * floor))
        aux_nl = Power(A / (A - 1), A - 1)
        back = lambda fr: cole_hopf_u(fr, nl, A)
    else:
        branch = "exponential"
        A = 1.0
        floor = float(-nl.log_F(np.array(s1)))
        aux0 = log_transform(u0, nl).map(lambda x: smooth_max(x, floor, smoothing))
        aux_nl = Exponential()
        back = lambda fr: log_transform_inv(fr, nl)
    aux_cfg = EvolveConfig(cfg.T, cfg.dt_init, cfg.dt_min,
                           max(cfg.blowup_cap, 10 * float(np.abs(aux0.values).max()) + 1),
                           cfg.quadrature, cfg.max_picard, cfg.n_frames, cfg.picard_tol)
    aux = _evolve_signed(aux0, aux_nl, aux_cfg)
    if isinstance(aux, BlowupReport):
        raise BlowupDetected(f"auxiliary equation blows up near t={aux.time:.6g} ({EVIDENCE})",
                             aux.location, aux.time, None)
    ubar = SpaceTimeField(tuple(back(fr) for fr in aux.frames), aux.times)
    res, rmin = supersolution_residual(ubar, nl)
    inner = res[2:-2]
    field_ = u0.with_values(np.nan_to_num(inner.min(axis=0)), u0.boundary)
    return SupersolutionResult(ubar, aux, field_, rmin, rmin >= -RESIDUAL_TOL, A, s1, branch)


def _evolve_signed(u0: GridField, nl: NonlinearitySpec, cfg: EvolveConfig):
    """imex_evolve without the sign check (the exponential model allows w < 0)."""
    if np.all(u0.values >= 0):
        return imex_evolve(u0, nl, cfg)
    shift = float(-u0.values.min())
    # e^{w} with w = z - shift: z_t = Δz + e^{-shift} e^{z}
    scaled = _ShiftedExp(shift)
    z0 = u0.map(lambda x: x + shift)
    out = imex_evolve(z0, scaled, cfg)
    if isinstance(out, BlowupReport):
        return out
    return SpaceTimeField(tuple(fr.map(lambda x: x - shift) for fr in out.frames), out.times)


class _ShiftedExp(NonlinearitySpec):
    """f(z) = e^{z - shift}; used to keep the split-step input nonnegative."""

    domain_floor = -math.inf
    exact_A = 1.0

    def __init__(self, shift):
        self.shift = shift
        self.name = f"exp(z-{shift:g})"

    def f(self, s):
        return np.exp(np.asarray(s, float) - self.shift)

    fprime = f

    def F(self, s):
        return np.exp(self.shift - np.asarray(s, float))


# ---------------------------------------------------------------------------
# Weissler certificate

def weissler_a(k: int, l: int) -> int:
    """a_l from a_{l+1} = k a_l + 1, a_1 = k + 1, i.e. (k^{l+1} - 1)/(k - 1)."""
    return (k ** (l + 1) - 1) // (k - 1)


def weissler_constant(k: int, tail_tol: float = 1e-12) -> tuple[float, int, float]:
    """C_k = sum_{i>=1} k^{-i} log(k! a_i) with a geometric tail bound.

    Uses log(k! a_i) <= log k! + (i+1) log k, so the tail after n terms is at
    most k^{-n}/(k-1) log k! + log k * sum_{i>n} (i+1) k^{-i}.  The returned
    bound also covers the rounding of the n summed terms.
    Returns (C_k, terms used, error bound).
    """
    if k < 2:
        raise ConfigError("k must be >= 2")
    lf = math.lgamma(k + 1)
    lk = math.log(k)
    x = 1.0 / k
    terms, n = [], 0
    while True:
        n += 1
        a_n = (k ** (n + 1) - 1) // (k - 1)
        terms.append(x ** n * (lf + math.log(a_n)))
        # sum_{i>n} i x^i = x^{n+1} ((n+1) - n x) / (1-x)^2
        s_i = x ** (n + 1) * ((n + 1) - n * x) / (1 - x) ** 2
        s_1 = x ** (n + 1) / (1 - x)
        tail = lf * s_1 + lk * (s_i + s_1)
        if tail < tail_tol:
            total = math.fsum(terms)
            # each term carries a few ulps from lgamma/log/pow, fsum adds one more
            rounding = 4 * np.finfo(float).eps * (math.fsum(abs(t) for t in terms) + abs(total))
            return total, n, tail + rounding


@dataclass
class Certificate:
    times: tuple
    lhs: tuple
    rhs: tuple
    k: int
    C_k: float
    C: float
    violated: bool
    t_star: float
    slope: float
    intercept: float
    tail_bound: float
    note: str = EVIDENCE

    def summary(self) -> dict:
        return {"times": list(self.times), "lhs": list(self.lhs), "rhs": list(self.rhs),
                "k": self.k, "C_k": self.C_k, "C": self.C, "violated": self.violated,
                "t_star": self.t_star, "slope": self.slope, "intercept": self.intercept,
                "tail_bound": self.tail_bound, "note": self.note}


def weissler_certificate(u0: GridField, g: ConvexGrowth, k: int, times: Sequence[float],
                         C: float | None = None) -> Certificate:
    """Compare max e^{tΔ}u0 with g^{-1}((k/(k-1)) log(1/t) + C_k - (k/(k-1)) log C).

    ``violated`` is true when the smallest listed time violates the bound;
    ``t_star`` is the largest listed t with every listed time <= t_star violating.
    """
    ts = np.asarray(times, float)
    if ts.size < 1 or np.any(np.diff(ts) >= 0) or np.any(ts <= 0):
        raise ConfigError("times must be positive and strictly decreasing")
    if np.any(u0.values < g.s0 - 1e-12):
        raise ConfigError("initial data must stay above s0")
    C = g.linear_constant() if C is None else C
    if not C > 0:
        raise ConfigError("g(s) >= C s needs C > 0")
    Ck, _, tail = weissler_constant(k)
    kk = k / (k - 1)
    rhs = g.inverse(kk * np.log(1 / ts) + Ck - kk * math.log(C))
    lhs = np.array([float(apply_semigroup(u0, float(t)).values.max()) for t in ts])
    viol = lhs > rhs
    t_star = math.nan
    if viol[-1]:
        i = len(ts) - 1
        while i > 0 and viol[i - 1]:
            i -= 1
        t_star = float(ts[i])
    slope, icpt = (np.polyfit(np.log(1 / ts), lhs, 1) if ts.size >= 2 else (math.nan, math.nan))
    return Certificate(tuple(ts), tuple(lhs), tuple(float(x) for x in rhs), k, Ck, C,
                       bool(viol[-1]), t_star, float(slope), float(icpt), tail)


# ---------------------------------------------------------------------------
# contraction map in weighted uniformly local norms

@dataclass
class ContractionReport:
    alpha: float
    alpha_p: float
    critical: bool
    T: float
    q: float                        # weighted-norm exponent: pr, or inside (max{p,r}, pr) if critical
    sup_r_norm: float
    r_bound: float
    sup_weighted: float
    M: float
    in_ball: bool
    factor: float
    factors: list
    decay: list = field(default_factory=list)

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in ("alpha", "alpha_p", "critical", "T", "q", "sup_r_norm",
                                             "r_bound", "sup_weighted", "M", "in_ball", "factor",
                                             "factors", "decay")}


def contraction_probe(u0: GridField, p: float, r: float, rho: float, M: float, T: float,
                      n_steps: int = 64, n_pairs: int = 3, seed: int = 0,
                      eps: float = 1e-3, picard_steps: int = 3) -> ContractionReport:
    """Discrete Φ(u) = e^{tΔ}u0 + ∫_0^t e^{(t-s)Δ}|u|^{p-1}u ds and its Lipschitz ratio.

    The metric is d(u, v) = sup_t t^α ||u(t) - v(t)||_{q,ul,ρ} with
    α = (N/2)(1/r - 1/q), q = pr off the critical line and q = (max{p,r} + pr)/2
    on it, where the decay t^α ||u(t)||_q -> 0 is reported as well.  Pairs (u, u + eps t^{-α}φ) with random smooth φ
    give the empirical contraction factor.
    """
    N = u0.dim
    r_c = 0.5 * N * (p - 1)
    if not (p > 1 and r >= 1):
        raise ConfigError("contraction probe needs p > 1 and r >= 1")
    critical = abs(r - r_c) <= 1e-12 * max(1.0, r_c)
    if critical and r <= 1:
        raise CriticalExponent(f"critical exponent r = N(p-1)/2 = {r_c:g} requires r > 1")
    if r < r_c and not critical:
        raise ConfigError(f"r = {r:g} is below the critical value {r_c:g}")
    # at r = N(p-1)/2 the pr-norm weight gives alpha*p = 1 exactly, so the
    # critical metric uses an exponent q strictly between max{p, r} and pr
    q = 0.5 * (max(p, r) + p * r) if critical else p * r
    alpha = 0.5 * N * (1 / r - 1 / q)
    if not alpha * p < 1:
        raise ConfigError(f"alpha*p = {alpha * p:g} must be < 1")

    dt = T / n_steps
    times = dt * np.arange(n_steps + 1)
    heat = propagator(u0.grid, dt)
    far = _far_value(u0)
    lin = np.empty((n_steps + 1,) + u0.extents)
    lin[0] = u0.values
    for k in range(n_steps):
        lin[k + 1] = heat(lin[k], far)
    src = lambda u: np.abs(u) ** (p - 1) * u

    def phi(u):
        fu = src(u)
        out = np.empty_like(u)
        I = np.zeros(u0.extents)
        out[0] = lin[0]
        for k in range(n_steps):
            I = heat(I + 0.5 * dt * fu[k], None if far is None else 0.0) + 0.5 * dt * fu[k + 1]
            out[k + 1] = lin[k + 1] + I
        return out

    def wnorm(vals, q):
        b = u0.boundary if isinstance(u0.boundary, Periodic) else ConstantExtension(0.0)
        return uloc_norm(GridField(u0.grid.__class__(u0.origin, u0.spacing, u0.extents, b), vals),
                         UlocParams(q, rho))

    def metric(a, b):
        return max(times[k] ** alpha * wnorm(a[k] - b[k], q) for k in range(1, n_steps + 1))

    u = lin.copy()
    for _ in range(picard_steps):
        u = phi(u)
    r_norms = [uloc_norm(u0.with_values(u[k]), UlocParams(r, rho)) for k in range(n_steps + 1)]
    weighted = [times[k] ** alpha * uloc_norm(u0.with_values(u[k]), UlocParams(q, rho))
                for k in range(1, n_steps + 1)]
    r_bound = 2 * uloc_norm(u0, UlocParams(r, rho))
    sup_r, sup_w = max(r_norms), max(weighted)

    rng = np.random.default_rng(seed)
    coords = u0.grid.coords()
    lengths = u0.grid.lengths
    factors = []
    base = phi(u)
    for _ in range(n_pairs):
        phase = rng.uniform(0, 2 * np.pi, size=N)
        modes = rng.integers(1, 4, size=N)
        shape = 1 + 0.5 * np.prod([np.cos(2 * np.pi * m * x / L + ph)
                                   for m, x, L, ph in zip(modes, coords, lengths, phase)], axis=0)
        pert = np.empty_like(u)
        pert[0] = 0.0
        pert[1:] = eps * (times[1:, None] if N == 1 else times[1:].reshape((-1,) + (1,) * N)) ** (
            -alpha) * shape
        v = u + pert
        d_in = metric(u, v)
        factors.append(metric(base, phi(v)) / d_in)
    decay = [times[k] ** alpha * wnorm(u[k], q) for k in range(1, min(6, n_steps) + 1)] \
        if critical else []
    return ContractionReport(alpha, alpha * p, critical, T, q, sup_r, r_bound, sup_w, M,
                             bool(sup_r <= r_bound and sup_w <= M), float(max(factors)),
                             [float(f) for f in factors], decay)
