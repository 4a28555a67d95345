"""Quasi-scaling, its invariant integral, and the Cole-Hopf type transforms.

Each transform comes with a residual check: the change of variables maps a
solution of one semilinear heat equation to a function whose PDE residual is
an explicit gradient term, and the check evaluates both sides with finite
differences on discrete solutions.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import ConfigError, NonPositive, NotApplicable, RangeError
from .nonlinearity import NonlinearitySpec
from .uloc_grid import ConstantExtension, GridField, Periodic

CLAMP_SLACK = 1e-12
A_ONE_TOL = 1e-6


# ---------------------------------------------------------------------------
# space-time fields

@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    frames: tuple
    times: tuple

    def __post_init__(self):
        frames = tuple(self.frames)
        times = tuple(float(t) for t in self.times)
        if len(frames) != len(times) or not frames:
            raise ConfigError("need one time per frame and at least one frame")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("frame times must be strictly increasing")
        g = frames[0].grid
        if any(fr.grid.extents != g.extents or fr.grid.spacing != g.spacing
               or fr.grid.origin != g.origin for fr in frames):
            raise ConfigError("frames must share grid geometry")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "times", times)

    @property
    def grid(self):
        return self.frames[0].grid

    def stack(self) -> np.ndarray:
        return np.stack([fr.values for fr in self.frames])

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def final(self) -> GridField:
        return self.frames[-1]


@dataclass
class TransformReport:
    max_residual: float
    residual_field: GridField
    order_estimate: float | None = None
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"max_residual": self.max_residual, "order_estimate": self.order_estimate,
                **self.extras}


def residual_order(hs: Sequence[float], residuals: Sequence[float]) -> float:
    """Least-squares slope of log(residual) against log(h) (needs >= 3 levels)."""
    if len(hs) < 3:
        raise ConfigError("order estimate needs at least three levels")
    return float(np.polyfit(np.log(hs), np.log(residuals), 1)[0])


def with_order(reports: Sequence[TransformReport], hs: Sequence[float]) -> TransformReport:
    """Finest report with the observed order across all levels attached."""
    finest = reports[-1]
    finest.order_estimate = residual_order(hs, [r.max_residual for r in reports])
    return finest


# ---------------------------------------------------------------------------
# helpers

def _apply_F_inv(nl: NonlinearitySpec, log_y: np.ndarray) -> np.ndarray:
    """F^{-1}(exp(log_y)) with the range clamp."""
    top = math.log(nl.F_sup) if math.isfinite(nl.F_sup) else math.inf
    over = log_y - top
    if np.any(over > CLAMP_SLACK):
        raise RangeError(f"argument exceeds the range of F by {np.expm1(over.max()):.3g} relative")
    return nl.F_inv_log(np.minimum(log_y, top))


def _sample_scaled(u: GridField, lam: float) -> np.ndarray:
    """Values of u at lam*x for every node x."""
    g = u.grid
    idx = [(lam * ax - o) / g.spacing for ax, o in zip(g.axes(), g.origin)]
    rounded = [np.rint(i) for i in idx]
    if all(np.allclose(i, r, atol=1e-9) for i, r in zip(idx, rounded)):
        ints = [r.astype(np.intp) for r in rounded]
        if isinstance(u.boundary, Periodic):
            ints = [i % n for i, n in zip(ints, g.extents)]
            return u.values[np.ix_(*ints)]
        pad = max(max(int(np.abs(i).max()), int((i - n + 1).max())) for i, n in zip(ints, g.extents))
        pad = max(pad, 0)
        return u.padded(pad)[np.ix_(*[i + pad for i in ints])]
    coords = np.meshgrid(*idx, indexing="ij")
    if isinstance(u.boundary, Periodic):
        return ndimage.map_coordinates(u.values, coords, order=1, mode="grid-wrap")
    return ndimage.map_coordinates(u.values, coords, order=1, mode="constant",
                                   cval=u.boundary.value)


def _boundary_of(u: GridField, fn) -> object:
    b = u.boundary
    if isinstance(b, ConstantExtension):
        return ConstantExtension(float(fn(np.array(b.value))))
    return b


# ---------------------------------------------------------------------------
# quasi-scaling

def quasi_scale(u0: GridField, nl: NonlinearitySpec, lam: float) -> GridField:
    """x -> F^{-1}(lam^{-2} F(u0(lam x))), with linear interpolation off-node."""
    if not lam > 0:
        raise ConfigError("scaling factor must be positive")
    if lam == 1:
        return u0
    w = _sample_scaled(u0, lam)
    shift = 2 * math.log(lam)
    op = lambda v: _apply_F_inv(nl, nl.log_F(v) - shift)
    return u0.with_values(op(w), _boundary_of(u0, op))


def _region_mask(u: GridField, region) -> np.ndarray:
    if region is None:
        return np.ones(u.extents, bool)
    lo, hi = region
    mask = np.ones(u.extents, bool)
    for x, a, b in zip(u.grid.coords(), lo, hi):
        mask &= (x >= a - 1e-12) & (x < b - 1e-12)
    return mask


def invariant_integral(u0: GridField, nl: NonlinearitySpec, N: int | None = None,
                       region=None) -> float:
    """sum F(u0)^{-N/2} h^N over the box, or over the sub-box region=(lo, hi)."""
    N = u0.dim if N is None else N
    with np.errstate(over="ignore"):
        vals = np.exp(-0.5 * N * nl.log_F(u0.values))
    return float(vals[_region_mask(u0, region)].sum() * u0.grid.cell_volume)


# ---------------------------------------------------------------------------
# finite differences

def _pad1(values: np.ndarray, boundary, axis: int) -> np.ndarray:
    widths = [(0, 0)] * values.ndim
    widths[axis] = (1, 1)
    if isinstance(boundary, Periodic):
        return np.pad(values, widths, mode="wrap")
    return np.pad(values, widths, mode="constant", constant_values=boundary.value)


def _laplacian(values: np.ndarray, h: float, boundary, first_axis: int = 0) -> np.ndarray:
    out = np.zeros_like(values)
    for ax in range(first_axis, values.ndim):
        p = _pad1(values, boundary, ax)
        n = values.shape[ax]
        out += (np.take(p, range(2, n + 2), ax) - 2 * values + np.take(p, range(0, n), ax)) / h ** 2
    return out


def _grad_sq(values: np.ndarray, h: float, boundary, first_axis: int = 0) -> np.ndarray:
    out = np.zeros_like(values)
    for ax in range(first_axis, values.ndim):
        p = _pad1(values, boundary, ax)
        n = values.shape[ax]
        out += ((np.take(p, range(2, n + 2), ax) - np.take(p, range(0, n), ax)) / (2 * h)) ** 2
    return out


def _time_derivative(stack: np.ndarray, times) -> np.ndarray:
    t = np.asarray(times, float)
    if len(t) < 3:
        raise ConfigError("need at least three frames for time differences")
    return np.gradient(stack, t, axis=0, edge_order=1)


def _interior_mask(shape, boundary, n_frames) -> np.ndarray:
    """Interior frames, and nodes away from a constant-extension edge."""
    mask = np.zeros((n_frames,) + shape, bool)
    mask[1:-1] = True
    if isinstance(boundary, ConstantExtension):
        for ax in range(len(shape)):
            sl = [slice(None)] * (len(shape) + 1)
            sl[ax + 1] = [0, shape[ax] - 1]
            mask[tuple(sl)] = False
    return mask


def _pde_residual(stack, times, h, boundary, nl) -> np.ndarray:
    """u_t - Δu - f(u) on every frame."""
    return _time_derivative(stack, times) - _laplacian(stack, h, boundary, 1) - nl.f(stack)


def _report(residual: np.ndarray, mask: np.ndarray, frame: GridField, extras=None):
    peak = float(np.abs(residual[mask]).max()) if mask.any() else 0.0
    last = np.max(np.nonzero(mask.reshape(mask.shape[0], -1).any(axis=1))[0]) if mask.any() else -1
    field_ = frame.with_values(np.abs(residual[last]))
    return TransformReport(peak, field_, None, extras or {})


def quasi_scaled_residual(u: SpaceTimeField, nl: NonlinearitySpec, lam: float) -> TransformReport:
    """Evaluate the quasi-scaling remainder identity on a discrete solution u.

    u_λ(x, τ) is built at τ_i = t_i / λ² from w = u(λx, λ²τ).  The report
    carries R = ∂τ u_λ - Δu_λ - f(u_λ) - f(u_λ) f(w)^{-2} F(w)^{-1} |∇u(λx)|²
    [f'(w)F(w) - f'(u_λ)F(u_λ)], whose size measures how far u is from a
    solution.  ``extras['bracket_max']`` is the largest |f'F(w) - f'F(u_λ)|.
    """
    stack = u.stack()
    floor = nl.domain_floor
    if math.isfinite(floor) and np.any(stack <= floor):
        raise NonPositive("field touches the domain floor")
    grid = u.grid
    h = grid.spacing
    w = np.stack([_sample_scaled(fr, lam) for fr in u.frames])
    taus = [t / lam ** 2 for t in u.times]
    shift = 2 * math.log(lam)
    ul = _apply_F_inv(nl, nl.log_F(w) - shift)
    b = u.frames[0].boundary
    ul_b = _boundary_of(u.frames[0], lambda v: _apply_F_inv(nl, nl.log_F(v) - shift))
    grad_u_sq = _grad_sq(w, h, b, 1) / lam ** 2
    bracket = nl.fprimeF(w) - nl.fprimeF(ul)
    with np.errstate(over="ignore", invalid="ignore"):
        coupling = nl.f(ul) * np.exp(-2 * np.log(nl.f(w)) - nl.log_F(w)) * grad_u_sq * bracket
    R = (_time_derivative(ul, taus) - _laplacian(ul, h, ul_b, 1) - nl.f(ul)) - coupling
    mask = _interior_mask(grid.extents, b, len(taus))
    return _report(R, mask, u.frames[0],
                   {"bracket_max": float(np.abs(bracket).max()), "lambda": lam})


def general_transform_residual(v: SpaceTimeField, g: NonlinearitySpec,
                               f: NonlinearitySpec) -> TransformReport:
    """Residual of ũ = F^{-1}(G(v)) against the Cole-Hopf remainder identity.

    Checks ∂t ũ - Δũ - f(ũ) = f(ũ)|∇v|²/(g(v)² F(ũ)) (g'(v)G(v) - f'(ũ)F(ũ)).
    ``extras['rhs_min']`` is the smallest value of the right-hand side, which
    is nonnegative when ũ is a supersolution.
    """
    stack = v.stack()
    floor = g.domain_floor
    if math.isfinite(floor) and np.any(stack <= floor):
        raise NonPositive("field touches the domain floor")
    h = v.grid.spacing
    b = v.frames[0].boundary
    u_t = _apply_F_inv(f, g.log_F(stack))
    ub = _boundary_of(v.frames[0], lambda x: _apply_F_inv(f, g.log_F(x)))
    lhs = _time_derivative(u_t, v.times) - _laplacian(u_t, h, ub, 1) - f.f(u_t)
    with np.errstate(over="ignore", invalid="ignore"):
        rhs = (f.f(u_t) * _grad_sq(stack, h, b, 1)
               * np.exp(-2 * np.log(g.f(stack)) - f.log_F(u_t))
               * (g.fprimeF(stack) - f.fprimeF(u_t)))
    mask = _interior_mask(v.grid.extents, b, len(v.times))
    return _report(lhs - rhs, mask, v.frames[0], {"rhs_min": float(rhs[mask].min())})


# ---------------------------------------------------------------------------
# Cole-Hopf type transforms

def _A_of(nl, A):
    return nl.A_value if A is None else A


def cole_hopf_v(u: GridField, nl: NonlinearitySpec, A: float | None = None) -> GridField:
    """v = F(u)^{-(A-1)} for A > 1."""
    A = _A_of(nl, A)
    if A - 1 <= A_ONE_TOL:
        raise NotApplicable("A = 1: use log_transform")
    op = lambda s: np.exp(-(A - 1) * nl.log_F(s))
    return u.with_values(op(u.values), _boundary_of(u, op))


def cole_hopf_u(v: GridField, nl: NonlinearitySpec, A: float | None = None) -> GridField:
    """Inverse of cole_hopf_v: u = F^{-1}(v^{-1/(A-1)})."""
    A = _A_of(nl, A)
    if A - 1 <= A_ONE_TOL:
        raise NotApplicable("A = 1: use log_transform_inv")
    if np.any(v.values <= 0):
        raise NonPositive("cole_hopf_u needs v > 0")
    op = lambda x: _apply_F_inv(nl, -np.log(x) / (A - 1))
    return v.with_values(op(v.values), _boundary_of(v, op))


def log_transform(u: GridField, nl: NonlinearitySpec) -> GridField:
    """w = -log F(u)."""
    op = lambda s: -nl.log_F(s)
    return u.with_values(op(u.values), _boundary_of(u, op))


def log_transform_inv(w: GridField, nl: NonlinearitySpec) -> GridField:
    """u = F^{-1}(e^{-w})."""
    op = lambda x: _apply_F_inv(nl, -x)
    return w.with_values(op(w.values), _boundary_of(w, op))


class Convexity(enum.Flag):
    CONVEX = 1
    CONCAVE = 2
    LINEAR = 3
    MIXED = 4


class TransformMode(enum.Enum):
    POWER = "PowerTransform"
    LOG = "LogTransform"


def convexity_probe(nl: NonlinearitySpec, mode: TransformMode, s_grid,
                    A: float | None = None) -> Convexity:
    """Sign of the discrete second derivative of F^{-(A-1)} or log F^{-1}."""
    s = np.asarray(s_grid, float)
    if s.size < 3 or np.any(np.diff(s) <= 0):
        raise ConfigError("convexity probe needs an increasing grid of >= 3 points")
    if mode is TransformMode.POWER:
        A = _A_of(nl, A)
        phi = np.exp(-(A - 1) * nl.log_F(s))
    else:
        phi = -nl.log_F(s)
    slopes = np.diff(phi) / np.diff(s)
    jumps = np.diff(slopes)
    tol = 1e-10 * np.maximum(np.abs(slopes[1:]), np.abs(slopes[:-1]))
    convex = bool(np.all(jumps >= -tol))
    concave = bool(np.all(jumps <= tol))
    if convex and concave:
        return Convexity.LINEAR
    if convex:
        return Convexity.CONVEX
    if concave:
        return Convexity.CONCAVE
    return Convexity.MIXED
