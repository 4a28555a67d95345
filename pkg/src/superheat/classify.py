"""Existence / nonexistence verdicts and existence-time lower bounds.

The decision uses the constant A, the side of f'F relative to A, the
exponent r against the critical line N/2 and the floor A-1, and the
refinement trend of the integral of F(u0)^{-r} in the uniformly local L^1
norm.  Every verdict is re-audited against the conditions of its regime.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, NoRoot, SingularCell, SuperheatError
from .nonlinearity import NonlinearitySpec, Power, PowerSum, ShiftedPower, Side
from .uloc_grid import Grid, GridField, Trend, UlocParams, classification_integral, \
    refine_trend, uloc_norm

A_ONE_TOL = 1e-6
R_TOL = 1e-12

SUBCRITICAL = "SubcriticalExists"
CRITICAL = "CriticalExists"
WITNESS = "NonexistenceWitness"
RAPID = "RapidGrowthNonexistence"
INDETERMINATE = "Indeterminate"

FORMS = ("Eq113", "Eq115", "Eq211", "Eq53", "Eq524", "Eq214")


# ---------------------------------------------------------------------------
# existence-time bounds

@dataclass
class ExistenceTimeBound:
    form: str
    gamma: float
    epsilon: Optional[float]
    gamma_eps: Optional[float]
    norm_value: float
    T_lower: float
    no_root: bool = False
    params: dict = field(default_factory=dict)


def _terms(form: str, N: int, r: float, rho: float, norm: float, *, A=None, p=None,
           eps=None, gamma_eps=None) -> Callable[[float], float]:
    """Left-hand side T -> value for each of the printed inequalities."""
    if form == "Eq113":
        a = 1 - 1 / A
        return lambda T: (T ** (0.5 * N * a) * rho ** (-N * a)
                          + norm * (T ** (r - N / (2 * A)) * rho ** (-N * (A - 1) / A)
                                    + T ** (r - N / 2)))
    if form in ("Eq115", "Eq524", "Eq214"):
        return lambda T: (T ** (0.5 * eps * N) * rho ** (-eps * N)
                          + gamma_eps * norm * (T ** (r - 0.5 * N * (1 - eps)) * rho ** (-eps * N)
                                                + T ** (r - N / 2)))
    if form == "Eq211":
        e = r / (p - 1)
        return lambda T: (T ** (N / (2 * p)) * rho ** (-N / p)
                          + norm * (T ** (e - 0.5 * N * (p - 1) / p) * rho ** (-N / p)
                                    + T ** (e - N / 2)))
    if form == "Eq53":
        return lambda T: (T ** (N / (2 * p)) * rho ** (-N / p)
                          + norm * (T ** (r - 0.5 * N * (p - 1) / p) * rho ** (-N / p)
                                    + T ** (r - N / 2)))
    raise ConfigError(f"unknown form {form!r}; expected one of {FORMS}")


def bound_lhs(form: str, N: int, r: float, rho: float, norm_value: float, *, A=None, p=None,
              gamma: float = 1.0, epsilon=None, c_eps=None) -> Callable[[float], float]:
    """The left-hand side as a function of T, with gamma_eps resolved."""
    eps_forms = ("Eq115", "Eq524", "Eq214")
    gamma_eps = None
    if form in eps_forms:
        if epsilon is None or not 0 < epsilon < 1:
            raise ConfigError(f"{form} needs 0 < epsilon < 1")
        c_eps = 2 * r if c_eps is None else c_eps
        gamma_eps = gamma * epsilon ** (-c_eps)
    if form == "Eq113" and (A is None or not A > 1):
        raise ConfigError("Eq113 needs A > 1")
    if form in ("Eq211", "Eq53") and (p is None or not p > 1):
        raise ConfigError(f"{form} needs p > 1")
    return _terms(form, N, r, rho, norm_value, A=A, p=p, eps=epsilon, gamma_eps=gamma_eps)


def existence_time_lower_bound(form: str, nl: NonlinearitySpec | None, N: int, r: float,
                               rho: float, norm_value: float, gamma: float = 1.0,
                               epsilon: float | None = None, c_eps: float | None = None,
                               *, A: float | None = None, p: float | None = None,
                               T_floor: float = 1e-300, strict: bool = False
                               ) -> ExistenceTimeBound:
    """Largest T with LHS(T) <= gamma, i.e. the root of LHS(T) = gamma.

    A and p default to the nonlinearity (A_value, and p for power families).
    The left side is checked to be nondecreasing in T before the root search,
    which runs in log T.  If LHS(T_floor) already exceeds gamma the bound is
    T_floor with ``no_root`` set (or NoRoot is raised when ``strict``).
    """
    if not gamma > 0 or not norm_value >= 0 or not rho > 0:
        raise ConfigError("need gamma > 0, norm >= 0, rho > 0")
    if nl is not None:
        A = nl.A_value if A is None else A
        if p is None and isinstance(nl, (Power, PowerSum, ShiftedPower)):
            p = nl.p
    lhs = bound_lhs(form, N, r, rho, norm_value, A=A, p=p, gamma=gamma, epsilon=epsilon,
                    c_eps=c_eps)
    c_eps_used = (2 * r if c_eps is None else c_eps) if epsilon is not None else None
    gamma_eps = gamma * epsilon ** (-c_eps_used) if c_eps_used is not None else None
    probe = np.exp(np.linspace(math.log(T_floor), math.log(1e300), 2001))
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.array([lhs(t) for t in probe])
    finite = np.isfinite(vals)
    if np.any(np.diff(vals[finite]) < -1e-12 * np.abs(vals[finite][1:])):
        raise ConfigError(f"{form}: left side is not nondecreasing in T for these exponents")
    params = {"N": N, "r": r, "rho": rho, "A": A, "p": p, "c_eps": c_eps_used}
    if lhs(np.float64(T_floor)) >= gamma:
        if strict:
            raise NoRoot(f"{form}: left side exceeds gamma already at T={T_floor:g}")
        return ExistenceTimeBound(form, gamma, epsilon, gamma_eps, norm_value, T_floor, True,
                                  params)
    hi_idx = int(np.argmax(finite & (vals >= gamma)))
    if not (finite[hi_idx] and vals[hi_idx] >= gamma):
        raise NoRoot(f"{form}: left side never reaches gamma")
    lo_T, hi_T = probe[hi_idx - 1], probe[hi_idx]
    g = lambda z: float(lhs(np.exp(np.float64(z)))) - gamma
    z = brentq(g, math.log(lo_T), math.log(hi_T), xtol=1e-300, rtol=4 * np.finfo(float).eps,
               maxiter=500)
    return ExistenceTimeBound(form, gamma, epsilon, gamma_eps, norm_value, math.exp(z), False,
                              params)


# ---------------------------------------------------------------------------
# verdicts

@dataclass
class Verdict:
    regime: str
    theorem: str
    inputs: dict
    time_bound: Optional[ExistenceTimeBound] = None
    notes: list = field(default_factory=list)
    convergence_mode: Optional[str] = None
    audit: list = field(default_factory=list)   # violated conditions; empty when sound

    def to_dict(self) -> dict:
        out = asdict(self)
        return out


def _has(side: Side, part: Side) -> bool:
    return bool(side & part) and side not in (Side.MIXED, Side.UNKNOWN)


def audit_verdict(v: Verdict) -> list:
    """Re-check the regime's conditions from the echoed inputs."""
    i = v.inputs
    N, r, A, side = i["N"], i["r"], i["A"], Side[i["side"]]
    trend = i.get("trend")
    half = N / 2
    bad = []
    if v.regime == SUBCRITICAL:
        if not (r >= A - 1 - R_TOL and r > half + R_TOL and _has(side, Side.BELOW)
                and trend == "Converging"):
            bad.append("subcritical needs r >= A-1, r > N/2, side Below and a finite integral")
    elif v.regime == CRITICAL:
        if not (abs(r - half) <= R_TOL and half > A - 1 + R_TOL and _has(side, Side.BELOW)):
            bad.append("critical needs r = N/2 > A-1 and side Below")
    elif v.regime == WITNESS:
        one = abs(A - 1) <= A_ONE_TOL
        r_ok = (0 < r < half - R_TOL) if one else (A - 1 - R_TOL <= r < half - R_TOL)
        if not (r_ok and _has(side, Side.ABOVE) and A - 1 < half):
            bad.append("nonexistence witness needs r in [A-1, N/2) (or (0, N/2) when A = 1) "
                       "and side Above")
    elif v.regime == RAPID:
        if not (abs(A - 1) <= A_ONE_TOL and _has(side, Side.BELOW) and 0 < r < half - R_TOL):
            bad.append("rapid-growth nonexistence needs A = 1, side Below, r < N/2")
    elif v.regime != INDETERMINATE:
        bad.append(f"unknown regime {v.regime}")
    return bad


def _levels_from(u0) -> list:
    """Three refinement levels, coarsest first."""
    if callable(u0):
        return [u0(k) for k in range(3)]
    if isinstance(u0, (list, tuple)):
        if len(u0) < 3:
            raise ConfigError("need at least three refinement levels")
        return sorted(u0, key=lambda f: -f.spacing)
    if any(n % 4 for n in u0.extents):
        raise ConfigError("grid extents must be divisible by 4 to build coarser levels")
    out = []
    for step in (4, 2, 1):
        sl = tuple(slice(None, None, step) for _ in u0.extents)
        g = Grid(u0.origin, u0.spacing * step, tuple(n // step for n in u0.extents), u0.boundary)
        out.append(GridField(g, u0.values[sl]))
    return out


def integral_trend(nl: NonlinearitySpec, u0, r: float, rho: float):
    """classification_integral on each level and its refinement trend."""
    levels = []
    for fld in _levels_from(u0):
        try:
            val = classification_integral(fld, nl, r, rho)
        except SingularCell:
            val = math.inf
        levels.append((fld.spacing, val))
    if any(math.isinf(v) for _, v in levels):
        return Trend("Diverging", math.inf, math.inf, math.inf), levels
    return refine_trend(levels), levels


def _finest(u0) -> GridField:
    return _levels_from(u0)[-1] if not isinstance(u0, GridField) else u0


def classify(nl: NonlinearitySpec, u0, N: int | None, r: float, rho: float,
             gamma: float = 1.0, epsilon: float = 0.1) -> Verdict:
    """Classify local existence for u_t = Δu + f(u) with data u0.

    ``u0`` is a GridField (coarser levels are taken by subsampling), a list
    of fields at successive refinements, or a callable level -> GridField.
    """
    finest = _finest(u0)
    N = finest.dim if N is None else int(N)
    if not r > 0 or not rho > 0:
        raise ConfigError("r and rho must be positive")
    notes = []
    if N != finest.dim:
        notes.append(f"integral evaluated on a {finest.dim}-D grid for N = {N}")
    if isinstance(nl, PowerSum):
        v = _classify_powersum(nl, u0, finest, N, r, rho, gamma, notes)
    else:
        v = _classify_general(nl, u0, finest, N, r, rho, gamma, epsilon, notes)
    v.audit = audit_verdict(v)
    if v.audit:
        raise SuperheatError(f"verdict failed its own audit: {v.audit}")
    return v


def _classify_general(nl, u0, finest, N, r, rho, gamma, epsilon, notes, theorem_prefix="1",
                      side=None, A=None):
    A = nl.A_value if A is None else A
    side = nl.side if side is None else side
    one = abs(A - 1) <= A_ONE_TOL
    half = N / 2
    trend, levels = integral_trend(nl, u0, r, rho)
    inputs = {"N": N, "r": r, "A": A, "side": side.name, "rho": rho, "nonlinearity": nl.name,
              "integral": levels[-1][1], "trend": trend.kind, "levels": levels}
    mode = "L^inf" if one else f"L^{r / (A - 1):.17g}_ul,rho"

    def verdict(regime, theorem, bound=None):
        return Verdict(regime, theorem, inputs, bound, notes, mode)

    if side in (Side.MIXED, Side.UNKNOWN):
        notes.append(f"f'F has no stable side relative to A (side {side.label}); no theorem applies")
        return verdict(INDETERMINATE, "none")
    notes.append("side detection is a heuristic: the side must hold for 8 further doublings")
    below, above = _has(side, Side.BELOW), _has(side, Side.ABOVE)

    if r > half + R_TOL:
        if r < A - 1 - R_TOL:
            notes.append("r in (N/2, A-1): no statement is available for this range")
            return verdict(INDETERMINATE, "none")
        if not below:
            notes.append("existence needs f'F <= A for large s")
            return verdict(INDETERMINATE, "none")
        if trend.kind != "Converging":
            notes.append(f"F(u0)^(-r) refinement trend is {trend.kind}; data not shown to be "
                         "in the admissible class")
            return verdict(INDETERMINATE, "none")
        s1 = nl.s_threshold
        F_s1 = float(np.exp(-r * nl.log_F(np.array(s1))))
        norm = max(levels[-1][1], F_s1 * rho ** N)
        if one:
            bound = existence_time_lower_bound("Eq115", nl, N, r, rho, norm, gamma, epsilon, A=A)
        else:
            bound = existence_time_lower_bound("Eq113", nl, N, r, rho, norm, gamma, A=A)
        notes.append("the solution converges to e^{tΔ}u0 (not necessarily to u0) as t -> 0")
        return verdict(SUBCRITICAL, f"Thm {theorem_prefix}.1(i)", bound)

    if abs(r - half) <= R_TOL:
        if half > A - 1 + R_TOL and below:
            if trend.kind != "Converging":
                notes.append(f"F(u0)^(-N/2) refinement trend is {trend.kind}")
                return verdict(INDETERMINATE, "none")
            notes.append("critical case needs F(u0)^(-N/2) in the closure of bounded functions; "
                         "checked only through a finite refinement trend")
            return verdict(CRITICAL, f"Thm {theorem_prefix}.1(ii)")
        notes.append("critical line without r = N/2 > A-1 and side Below")
        return verdict(INDETERMINATE, "none")

    # r < N/2
    if not one and r < A - 1 - R_TOL:
        notes.append("r below the floor A-1")
        return verdict(INDETERMINATE, "none")
    if not A - 1 < half:
        notes.append("A-1 >= N/2: nonexistence results do not apply")
        return verdict(INDETERMINATE, "none")
    if above:
        notes.append("nonexistence holds for some data in the class; this u0 is not itself "
                     "certified")
        return verdict(WITNESS, "Thm 1.3")
    if one and below:
        notes.append("nonexistence holds for some data in the class; this u0 is not itself "
                     "certified")
        return verdict(RAPID, "Thm 1.4")
    notes.append("side Below with A > 1 below the critical line: no theorem applies")
    return verdict(INDETERMINATE, "none")


def _classify_powersum(nl: PowerSum, u0, finest, N, r, rho, gamma, notes):
    """u^p + u^q through comparison functions with f'F identically A.

    Existence uses the majorant 2(1+s)^p, whose F^{-r} is comparable to
    (1+s)^{r(p-1)}; nonexistence uses the minorant s^p.  The audit runs
    against the comparison function's side (constant).
    """
    A = nl.p / (nl.p - 1)
    half = N / 2
    notes.append(f"detected side of f'F for {nl.name}: {nl.side.label}; verdict uses comparison "
                 "functions with f'F identically A")
    if r >= half - R_TOL:
        major = ShiftedPower(nl.p, 2.0, 1.0)
        v = _classify_general(major, u0, finest, N, r, rho, gamma, None, notes, "5",
                              side=Side.CONSTANT, A=A)
        v.inputs["nonlinearity"] = nl.name
        v.inputs["comparison"] = major.name
        if v.regime == SUBCRITICAL:
            norm_p = uloc_norm(finest, UlocParams(r * (nl.p - 1), rho)) ** (r * (nl.p - 1))
            v.time_bound = existence_time_lower_bound("Eq53", nl, N, r, rho,
                                                      max(norm_p, rho ** N), gamma, p=nl.p)
        return v
    minor = Power(nl.p)
    v = _classify_general(minor, u0, finest, N, r, rho, gamma, None, notes, "5",
                          side=Side.CONSTANT, A=A)
    v.inputs["nonlinearity"] = nl.name
    v.inputs["comparison"] = minor.name
    if v.regime == WITNESS:
        v.theorem = "Thm 5.1(iii)"
    return v


# ---------------------------------------------------------------------------
# thresholds

@dataclass
class ThresholdReport:
    r_critical: float
    r_floor: float
    nonexistence_applies: bool
    gap_note: str
    weissler_rc: Optional[float] = None
    consistent: Optional[bool] = None


def threshold_report(nl: NonlinearitySpec, N: int) -> ThresholdReport:
    """Critical line r = N/2, floor r >= A-1, and whether nonexistence results apply."""
    A = nl.A_value
    r_c = N / 2
    floor = max(A - 1, 0.0)
    applies = A - 1 < r_c
    if applies:
        note = f"nonexistence results apply for r in [{floor:.6g}, {r_c:.6g})"
    else:
        note = (f"A-1 = {A - 1:.6g} >= N/2 = {r_c:.6g}: nonexistence results do not apply and "
                f"r in ({r_c:.6g}, {A - 1:.6g}) has no statement")
    rc_w = consistent = None
    if isinstance(nl, (Power, PowerSum)):
        rc_w = N * (nl.p - 1) / 2
        consistent = math.isclose(r_c * (nl.p - 1), rc_w, rel_tol=1e-14) and \
            math.isclose(floor * (nl.p - 1), 1.0, rel_tol=1e-12)
    return ThresholdReport(r_c, floor, applies, note, rc_w, consistent)
