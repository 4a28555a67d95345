"""Grid fields on boxes, uniformly local norms and the integrals F(u0)^{-r}."""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from . import _backend
from .errors import ConfigError, EmptyBall, InsufficientLevels, SingularCell

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Periodic:
    pass


@dataclass(frozen=True)
class ConstantExtension:
    value: float = 0.0


Boundary = Union[Periodic, ConstantExtension]


@dataclass(frozen=True)
class Grid:
    """Uniform node set x_i = origin + i*h on a box; row-major axis order."""

    origin: tuple
    spacing: float
    extents: tuple
    boundary: Boundary = Periodic()

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        if len(self.origin) != len(self.extents) or not 1 <= len(self.extents) <= 3:
            raise ConfigError("grid dimension must be 1, 2 or 3 with matching origin/extents")
        if not self.spacing > 0 or min(self.extents) < 1:
            raise ConfigError("grid spacing must be positive and extents >= 1")

    @classmethod
    def box(cls, lo, hi, n, dim=1, boundary: Boundary = Periodic()) -> "Grid":
        """Cube [lo, hi)^dim with n cells per axis."""
        return cls((lo,) * dim, (hi - lo) / n, (n,) * dim, boundary)

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def lengths(self) -> tuple:
        return tuple(n * self.spacing for n in self.extents)

    def axes(self) -> list:
        return [o + self.spacing * np.arange(n) for o, n in zip(self.origin, self.extents)]

    def coords(self) -> list:
        return np.meshgrid(*self.axes(), indexing="ij")

    def radius(self, center=None) -> np.ndarray:
        center = (0.0,) * self.dim if center is None else center
        return np.sqrt(sum((x - c) ** 2 for x, c in zip(self.coords(), center)))

    def refine(self) -> "Grid":
        return Grid(self.origin, self.spacing / 2, tuple(2 * n for n in self.extents), self.boundary)

    def field(self, values) -> "GridField":
        return GridField(self, values)

    def sample(self, fn) -> "GridField":
        """Evaluate fn(*coords) on the nodes."""
        return GridField(self, np.broadcast_to(fn(*self.coords()), self.extents))


@dataclass(frozen=True, eq=False)
class GridField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.extents:
            raise ConfigError(f"values shape {v.shape} does not match extents {self.grid.extents}")
        if not np.all(np.isfinite(v)):
            raise ConfigError("grid field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    # geometry passthrough
    dim = property(lambda self: self.grid.dim)
    origin = property(lambda self: self.grid.origin)
    spacing = property(lambda self: self.grid.spacing)
    extents = property(lambda self: self.grid.extents)
    boundary = property(lambda self: self.grid.boundary)

    def with_values(self, values, boundary: Boundary | None = None) -> "GridField":
        grid = self.grid if boundary is None else Grid(self.origin, self.spacing, self.extents, boundary)
        return GridField(grid, values)

    def map(self, fn) -> "GridField":
        """Apply fn pointwise; the extension constant is mapped as well."""
        b = self.boundary
        if isinstance(b, ConstantExtension):
            b = ConstantExtension(float(fn(np.array(b.value))))
        return self.with_values(fn(self.values), b)

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def padded(self, width: int) -> np.ndarray:
        """Values extended by ``width`` nodes per side using the boundary rule."""
        if isinstance(self.boundary, Periodic):
            return np.pad(self.values, width, mode="wrap")
        return np.pad(self.values, width, mode="constant", constant_values=self.boundary.value)


# ---------------------------------------------------------------------------
# I/O

def save_field(f: GridField, path, encoding: str = "binary") -> Path:
    """Write a JSON header at ``path`` and the payload beside it."""
    path = Path(path)
    if encoding not in ("binary", "csv"):
        raise ConfigError("encoding must be 'binary' or 'csv'")
    payload = path.with_suffix(".bin" if encoding == "binary" else ".csv")
    b = f.boundary
    header = {
        "dim": f.dim,
        "origin": list(f.origin),
        "spacing": f.spacing,
        "extents": list(f.extents),
        "boundary": {"kind": "periodic"} if isinstance(b, Periodic)
        else {"kind": "constant", "value": b.value},
        "encoding": encoding,
        "payload": payload.name,
    }
    flat = np.ascontiguousarray(f.values).ravel()
    if encoding == "binary":
        flat.astype("<f8").tofile(payload)
    else:
        payload.write_text("\n".join(repr(float(x)) for x in flat) + "\n")
    path.write_text(json.dumps(header, indent=1) + "\n")
    return path


def load_field(path) -> GridField:
    path = Path(path)
    try:
        header = json.loads(path.read_text())
        extents = tuple(header["extents"])
        payload = path.parent / header["payload"]
        if header.get("encoding", "binary") == "binary":
            flat = np.fromfile(payload, dtype="<f8")
        else:
            flat = np.array([float(x) for x in payload.read_text().split()])
        bd = header["boundary"]
        boundary = Periodic() if bd["kind"] == "periodic" else ConstantExtension(float(bd["value"]))
        grid = Grid(tuple(header["origin"]), float(header["spacing"]), extents, boundary)
        if int(header["dim"]) != grid.dim:
            raise ConfigError("header dim disagrees with extents")
        return GridField(grid, flat.astype(float).reshape(extents))
    except (KeyError, ValueError, OSError) as exc:
        raise ConfigError(f"cannot read grid field {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# uniformly local norms

@dataclass(frozen=True)
class UlocParams:
    p: float
    rho: float

    def __post_init__(self):
        if not (self.p >= 1) or not (self.rho > 0):
            raise ConfigError("uloc norm needs p >= 1 (or inf) and rho > 0")


def ball_offsets(dim: int, rho: float, h: float) -> np.ndarray:
    """Integer offsets k with |k|h <= rho (cell-centre inclusion)."""
    m = int(math.floor(rho / h * (1 + 1e-12)))
    lim = (rho / h) ** 2 * (1 + 1e-12)
    rng = range(-m, m + 1)
    pts = [k for k in itertools.product(rng, repeat=dim) if sum(c * c for c in k) <= lim]
    return np.array(pts, dtype=np.intp).reshape(-1, dim)


def discrete_ball_volume(dim: int, rho: float, h: float) -> float:
    return len(ball_offsets(dim, rho, h)) * h ** dim


def ball_volume(dim: int, rho: float) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * rho ** dim


def ball_chords(dim: int, rho: float, h: float):
    """Lead offsets (all axes but the last) and half-widths along the last axis."""
    offs = ball_offsets(dim, rho, h)
    lim = (rho / h) ** 2 * (1 + 1e-12)
    lead = offs[:, :-1]
    uniq = np.unique(lead, axis=0) if dim > 1 else np.zeros((1, 0), np.intp)
    widths = np.array([int(math.floor(math.sqrt(max(lim - int((k * k).sum()), 0.0))))
                       for k in uniq], dtype=np.intp)
    return uniq, widths, offs


def ball_sums(w: GridField, rho: float) -> np.ndarray:
    """sum_{x in B_rho(y)} w(x) h^N for every node y (array shaped like w).

    Prefix sums along the last axis turn each ball into one chord per lead
    offset, so the cost per node is the ball's cross-section, not its volume.
    """
    h = w.spacing
    if rho < h / 2:
        raise EmptyBall(f"rho={rho} is below half a cell (h={h})")
    lead, widths, offs = ball_chords(w.dim, rho, h)
    m = int(np.abs(offs).max()) if offs.size else 0
    if isinstance(w.boundary, Periodic) and any(2 * m + 1 > n for n in w.extents):
        raise ConfigError("ball diameter exceeds the periodic box")
    padded = w.padded(m)
    cum = np.zeros(padded.shape[:-1] + (padded.shape[-1] + 1,))
    np.cumsum(padded, axis=-1, out=cum[..., 1:])
    strides = np.array(cum.strides[:-1], dtype=np.intp) // cum.itemsize
    lead_flat = np.ascontiguousarray(lead @ strides if w.dim > 1 else np.zeros(1), dtype=np.intp)
    centers = np.ravel_multi_index(
        tuple((np.indices(w.extents) + m).reshape(w.dim, -1)), cum.shape).astype(np.intp)
    sums = _backend.chord_sums(cum.ravel(), centers, lead_flat, widths)
    return np.asarray(sums).reshape(w.extents) * w.grid.cell_volume


def uloc_norm(u: GridField, params: UlocParams) -> float:
    """sup over node-centred balls of (sum |u|^p h^N)^{1/p}; max |u| for p = inf."""
    if params.rho < u.spacing / 2:
        raise EmptyBall(f"rho={params.rho} is below half a cell (h={u.spacing})")
    if math.isinf(params.p):
        vals = np.abs(u.values)
        if isinstance(u.boundary, ConstantExtension):
            return float(max(vals.max(), abs(u.boundary.value)))
        return float(vals.max())
    w = u.map(lambda v: np.abs(v) ** params.p)
    return float(ball_sums(w, params.rho).max() ** (1.0 / params.p))


# ---------------------------------------------------------------------------
# classification integrals

def integrand_field(u0: GridField, nl, r: float) -> GridField:
    """x -> F(u0(x))^{-r}, evaluated through log F to avoid spurious overflow."""
    vals = u0.values
    if np.any(vals < 0):
        raise ConfigError("classification integral needs u0 >= 0")
    floor = nl.domain_floor
    if math.isinf(nl.F_sup) and np.isfinite(floor) and np.any(vals <= floor) and \
            type(nl).__name__ == "Custom":
        positive = vals[vals > floor]
        eps = (positive.min() if positive.size else 1.0) * 1e-6
        log.info("capping u0 below at %.3g where F(0+) is infinite", eps)
        vals = np.maximum(vals, floor + eps)
    with np.errstate(over="ignore"):
        out = np.exp(-r * nl.log_F(vals))
    bad = ~np.isfinite(out)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        pos = tuple(o + i * u0.spacing for o, i in zip(u0.origin, idx))
        raise SingularCell(f"F(u0)^(-r) overflows at node {idx} (x={pos})", idx, pos)
    b = u0.boundary
    if isinstance(b, ConstantExtension):
        b = ConstantExtension(float(np.exp(-r * nl.log_F(np.array(max(b.value, 0.0))))))
    return u0.with_values(out, b)


def classification_integral(u0: GridField, nl, r: float, rho: float) -> float:
    """Uniformly local L^1 norm of F(u0)^{-r}."""
    return uloc_norm(integrand_field(u0, nl, r), UlocParams(1.0, rho))


# ---------------------------------------------------------------------------
# refinement trends

DIVERGE_EXPONENT = 0.1


@dataclass(frozen=True)
class Trend:
    kind: str                      # "Converging", "Diverging" or "Ambiguous"
    limit: float = math.nan
    rate: float = math.nan         # fitted power growth exponent of value vs 1/h
    log_rate: float = math.nan     # growth per unit of log(1/h) on the finest pair
    order: float = math.nan        # observed convergence order when converging

    @property
    def converging(self) -> bool:
        return self.kind == "Converging"

    @property
    def diverging(self) -> bool:
        return self.kind == "Diverging"


def refine_trend(integrals: Sequence[tuple]) -> Trend:
    """Read integrability evidence off values at successively halved h.

    Increments shrinking geometrically mean convergence (the limit is
    Aitken-extrapolated).  Increments that do not shrink, together with a
    fitted growth exponent above 0.1, mean divergence.  Anything else is
    reported as ambiguous.
    """
    if len(integrals) < 3:
        raise InsufficientLevels("refine_trend needs at least three levels")
    pts = sorted(((float(h), float(v)) for h, v in integrals), key=lambda t: -t[0])
    hs = np.array([p[0] for p in pts])
    vs = np.array([p[1] for p in pts])
    v1, v2, v3 = vs[-3:]
    d1, d2 = v2 - v1, v3 - v2
    scale = max(np.abs(vs).max(), 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = float(np.polyfit(np.log(1 / hs), np.log(vs), 1)[0]) if np.all(vs > 0) else math.nan
    log_rate = d2 / math.log(hs[-2] / hs[-1])
    if abs(d2) <= 1e-12 * scale:
        return Trend("Converging", float(v3), beta, log_rate, math.inf)
    q = d2 / d1 if d1 != 0 else math.inf
    if d1 > 0 and d2 > 0 and q >= 2 ** -0.1 and beta > DIVERGE_EXPONENT:
        return Trend("Diverging", math.inf, beta, log_rate)
    if abs(q) < 2 ** -0.15:
        limit = v3 + d2 * q / (1 - q) if 0 < q < 1 else v3
        return Trend("Converging", float(limit), beta, log_rate, float(-math.log2(abs(q))))
    return Trend("Ambiguous", float(v3), beta, log_rate)
