"""Planar phased-array model, beam patterns, and beam-shape templates.

Elements sit on a rectangular lattice (spacing in wavelengths), centered on
the array origin, and are isotropic. Element ``k`` has lattice position
``(k % nx, k // nx)``. The array factor is

    AF(u, v) = sum_k w_k * exp(j*2*pi*(x_k*u + y_k*v))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, DegeneratePatternError, DomainError, ResolutionError
from .geom import Direction

DB_FLOOR = -300.0
DEFAULT_RASTER_N = 129


@dataclass(frozen=True)
class ArrayGeometry:
    nx: int
    ny: int
    dx: float = 0.5
    dy: float = 0.5
    alive: tuple = None

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise DomainError("array needs at least one element")
        if self.dx <= 0 or self.dy <= 0:
            raise DomainError("element spacing must be positive")
        if self.alive is None:
            object.__setattr__(self, "alive", (True,) * (self.nx * self.ny))
        else:
            object.__setattr__(self, "alive", tuple(bool(a) for a in self.alive))
        if len(self.alive) != self.nx * self.ny:
            raise ContractError(f"alive mask has {len(self.alive)} entries, expected {self.nx * self.ny}")

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def n_alive(self) -> int:
        return sum(self.alive)

    @property
    def alive_mask(self) -> np.ndarray:
        return np.array(self.alive, dtype=bool)

    @property
    def x(self) -> np.ndarray:
        """Element x positions in wavelengths, flattened."""
        xs = (np.arange(self.nx) - 0.5 * (self.nx - 1)) * self.dx
        return np.tile(xs, self.ny)

    @property
    def y(self) -> np.ndarray:
        ys = (np.arange(self.ny) - 0.5 * (self.ny - 1)) * self.dy
        return np.repeat(ys, self.nx)

    def with_alive(self, alive) -> "ArrayGeometry":
        return replace(self, alive=tuple(bool(a) for a in alive))


@dataclass(frozen=True)
class ExcitationVector:
    """Complex element drives; amplitude in [0, 1], dead elements exactly 0."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if np.abs(w).max(initial=0.0) > 1.0 + 1e-12:
            raise DomainError("excitation amplitude exceeds 1")

    @classmethod
    def from_amp_phase(cls, amplitude, phase) -> "ExcitationVector":
        return cls(np.asarray(amplitude, float) * np.exp(1j * np.asarray(phase, float)))

    @classmethod
    def uniform(cls, g: ArrayGeometry, steering: Direction | None = None) -> "ExcitationVector":
        amp = g.alive_mask.astype(float)
        phase = steering_phase(g, steering) if steering is not None else np.zeros(g.n_elements)
        return cls.from_amp_phase(amp, phase)

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.weights)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.weights)

    def __len__(self):
        return len(self.weights)

    def check(self, g: ArrayGeometry) -> None:
        if len(self.weights) != g.n_elements:
            raise ContractError(f"excitation length {len(self.weights)} != {g.n_elements} elements")
        if np.any(self.weights[~g.alive_mask] != 0):
            raise ContractError("dead elements must have zero amplitude")

    def masked(self, g: ArrayGeometry) -> "ExcitationVector":
        """Copy with dead elements of ``g`` zeroed."""
        w = np.where(g.alive_mask, self.weights, 0.0)
        return ExcitationVector(w)


def steering_phase(g: ArrayGeometry, d: Direction) -> np.ndarray:
    """Linear phase ramp that points the main beam at ``d``."""
    return -2.0 * math.pi * (g.x * d.u + g.y * d.v)


def array_factor(g: ArrayGeometry, w: ExcitationVector, d: Direction) -> complex:
    w.check(g)
    phase = 2.0 * math.pi * (g.x * d.u + g.y * d.v)
    return complex(np.sum(w.weights * np.exp(1j * phase)))


@dataclass(frozen=True)
class Raster:
    """Product raster ``u_axis x v_axis`` restricted by ``mask``.

    Points are the masked grid nodes in row-major (v, u) order; the product
    structure lets the array factor be evaluated as two small matrix products.
    """

    u_axis: np.ndarray
    v_axis: np.ndarray
    mask: np.ndarray

    @classmethod
    def default(cls, n: int = DEFAULT_RASTER_N) -> "Raster":
        """``n x n`` uniform raster over the unit square clipped to the disk."""
        axis = np.linspace(-1.0, 1.0, n)
        uu, vv = np.meshgrid(axis, axis)
        return cls(axis, axis, uu * uu + vv * vv <= 1.0 + 1e-12)

    @classmethod
    def box(cls, u_lo, u_hi, v_lo, v_hi, nu, nv) -> "Raster":
        ua, va = np.linspace(u_lo, u_hi, nu), np.linspace(v_lo, v_hi, nv)
        uu, vv = np.meshgrid(ua, va)
        return cls(ua, va, uu * uu + vv * vv <= 1.0 + 1e-12)

    @property
    def u(self) -> np.ndarray:
        return np.broadcast_to(self.u_axis[None, :], self.mask.shape)[self.mask]

    @property
    def v(self) -> np.ndarray:
        return np.broadcast_to(self.v_axis[:, None], self.mask.shape)[self.mask]

    def __len__(self):
        return int(self.mask.sum())


@dataclass
class BeamPattern:
    """Peak-normalized power pattern on a raster (gain in dB re peak)."""

    u: np.ndarray
    v: np.ndarray
    gain_db: np.ndarray
    peak_index: int
    gain_peak_dbi: float
    raster: Raster | None = field(default=None, repr=False)

    @property
    def peak_direction(self) -> Direction:
        return Direction(float(self.u[self.peak_index]), float(self.v[self.peak_index]))

    def two_way(self) -> "BeamPattern":
        """Transmit pattern squared in power (single two-way pattern model)."""
        return replace(self, gain_db=np.maximum(2.0 * self.gain_db, DB_FLOOR),
                       gain_peak_dbi=2.0 * self.gain_peak_dbi)


def _af_power(g: ArrayGeometry, weights: np.ndarray, raster) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """|AF|^2 at the raster points; ``weights`` may carry a leading batch axis."""
    if isinstance(raster, Raster):
        xs = (np.arange(g.nx) - 0.5 * (g.nx - 1)) * g.dx
        ys = (np.arange(g.ny) - 0.5 * (g.ny - 1)) * g.dy
        eu = np.exp(2j * math.pi * np.outer(raster.u_axis, xs))   # (Nu, nx)
        ev = np.exp(2j * math.pi * np.outer(raster.v_axis, ys))   # (Nv, ny)
        wm = weights.reshape(weights.shape[:-1] + (g.ny, g.nx))
        af = ev @ wm @ eu.T                                       # (..., Nv, Nu)
        power = (af.real ** 2 + af.imag ** 2)[..., raster.mask]
        return raster.u, raster.v, power
    us = np.array([d.u for d in raster], float)
    vs = np.array([d.v for d in raster], float)
    if us.size == 0:
        raise ContractError("raster is empty")
    steer = np.exp(2j * math.pi * (np.outer(us, g.x) + np.outer(vs, g.y)))
    af = weights @ steer.T
    return us, vs, af.real ** 2 + af.imag ** 2


def peak_gain_dbi(g: ArrayGeometry, weights: np.ndarray, peak_power: float, peak: Direction) -> float:
    """Absolute directive gain of the array at its peak.

    Array gain ``|AF|^2 / sum|w|^2`` times the gain of one lattice cell
    ``4*pi*dx*dy*cos(theta)`` (projected-aperture element model).
    """
    wsum = float(np.sum(np.abs(weights) ** 2))
    cell = 4.0 * math.pi * g.dx * g.dy * max(peak.cos_theta, 1e-12)
    return 10.0 * math.log10(peak_power / wsum) + 10.0 * math.log10(cell)


def pattern_on_raster(g: ArrayGeometry, w: ExcitationVector, raster=None) -> BeamPattern:
    w.check(g)
    if raster is None:
        raster = Raster.default()
    if isinstance(raster, Raster) and len(raster) == 0:
        raise ContractError("raster is empty")
    us, vs, power = _af_power(g, w.weights, raster)
    pmax = float(power.max())
    if not pmax > 0.0:
        raise DegeneratePatternError("pattern is identically zero")
    peak = int(np.argmax(power))  # first maximum = lowest raster index
    with np.errstate(divide="ignore"):
        gain_db = np.maximum(10.0 * np.log10(power / pmax), DB_FLOOR)
    gain_db[peak] = 0.0
    gdbi = peak_gain_dbi(g, w.weights, pmax, Direction(float(us[peak]), float(vs[peak])))
    return BeamPattern(us, vs, gain_db, peak, gdbi, raster if isinstance(raster, Raster) else None)


@dataclass(frozen=True)
class Rect:
    """Closed rectangle in (u, v)."""

    u_lo: float
    u_hi: float
    v_lo: float
    v_hi: float

    def __post_init__(self):
        if self.u_lo > self.u_hi or self.v_lo > self.v_hi:
            raise DomainError(f"inverted rectangle {self}")

    def contains(self, u, v):
        return (u >= self.u_lo) & (u <= self.u_hi) & (v >= self.v_lo) & (v <= self.v_hi)

    def shifted(self, du: float, dv: float) -> "Rect":
        return Rect(self.u_lo + du, self.u_hi + du, self.v_lo + dv, self.v_hi + dv)

    def interiors_overlap(self, other: "Rect") -> bool:
        eps = 1e-12
        return (min(self.u_hi, other.u_hi) - max(self.u_lo, other.u_lo) > eps
                and min(self.v_hi, other.v_hi) - max(self.v_lo, other.v_lo) > eps)

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.u_lo + self.u_hi), 0.5 * (self.v_lo + self.v_hi)


@dataclass(frozen=True)
class BeamTemplate:
    """Mainlobe floor plus sidelobe ceilings, in (u, v) relative to steering."""

    mainlobe: Rect
    min_gain_db: float
    sidelobe_mask: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sidelobe_mask", tuple((r, float(db)) for r, db in self.sidelobe_mask))
        if self.min_gain_db > 0:
            raise DomainError("mainlobe floor must be <= 0 dB")
        for r, db in self.sidelobe_mask:
            if not db < 0:
                raise DomainError("sidelobe ceilings must be < 0 dB")
            if r.interiors_overlap(self.mainlobe):
                raise DomainError("sidelobe region overlaps the mainlobe region")


def pencil_template(half_u: float, half_v: float, min_gain_db: float,
                    mask_start_u: float, mask_start_v: float, sidelobe_db: float,
                    extent: float = 2.0) -> BeamTemplate:
    """Rectangular mainlobe floor surrounded by a uniform sidelobe ceiling.

    The ceiling covers everything outside ``|du| < mask_start_u`` and
    ``|dv| < mask_start_v`` (four bands out to ``extent``); the gap between
    the floor rectangle and the ceiling is a free transition zone.
    """
    if mask_start_u < half_u or mask_start_v < half_v:
        raise DomainError("sidelobe mask must start outside the mainlobe region")
    e = extent
    bands = (
        (Rect(-e, -mask_start_u, -e, e), sidelobe_db),
        (Rect(mask_start_u, e, -e, e), sidelobe_db),
        (Rect(-mask_start_u, mask_start_u, -e, -mask_start_v), sidelobe_db),
        (Rect(-mask_start_u, mask_start_u, mask_start_v, e), sidelobe_db),
    )
    return BeamTemplate(Rect(-half_u, half_u, -half_v, half_v), min_gain_db, bands)


def template_cost(p: BeamPattern, t: BeamTemplate, steering: Direction) -> float:
    """Sum of squared dB violations of the template, translated to ``steering``.

    A raster point inside several sidelobe regions is charged once, against
    the tightest ceiling.
    """
    du, dv = p.u - steering.u, p.v - steering.v
    ml = t.mainlobe
    in_main = ml.contains(du, dv)
    if not np.any(in_main) or (p.raster is not None and not _raster_spans(p.raster, ml, steering)):
        raise ContractError("raster does not cover the template mainlobe at this steering")
    deficit = np.maximum(0.0, t.min_gain_db - p.gain_db[in_main])
    cost = float(np.dot(deficit, deficit))
    if t.sidelobe_mask:
        ceiling = np.full(p.gain_db.shape, np.inf)
        for r, db in t.sidelobe_mask:
            inside = r.contains(du, dv)
            ceiling[inside] = np.minimum(ceiling[inside], db)
        excess = np.maximum(0.0, p.gain_db - ceiling)
        cost += float(np.dot(excess, excess))
    return cost


class TemplateEvaluator:
    """``template_cost`` for batches of weight vectors on a fixed raster.

    Steering vectors and region masks are computed once; rows whose pattern
    is identically zero cost +inf.
    """

    def __init__(self, g: ArrayGeometry, raster: Raster, t: BeamTemplate, steering: Direction):
        self.g = g
        xs = (np.arange(g.nx) - 0.5 * (g.nx - 1)) * g.dx
        ys = (np.arange(g.ny) - 0.5 * (g.ny - 1)) * g.dy
        self._eu_t = np.exp(2j * math.pi * np.outer(raster.u_axis, xs)).T.copy()
        self._ev = np.exp(2j * math.pi * np.outer(raster.v_axis, ys))
        self._mask = raster.mask
        du, dv = raster.u - steering.u, raster.v - steering.v
        self._in_main = t.mainlobe.contains(du, dv)
        if not np.any(self._in_main) or not _raster_spans(raster, t.mainlobe, steering):
            raise ContractError("raster does not cover the template mainlobe at this steering")
        ceiling = np.full(du.shape, np.inf)
        for r, db in t.sidelobe_mask:
            inside = r.contains(du, dv)
            ceiling[inside] = np.minimum(ceiling[inside], db)
        self._masked = np.isfinite(ceiling)
        self._ceiling = ceiling[self._masked]
        self._floor = t.min_gain_db

    def __call__(self, weights: np.ndarray) -> np.ndarray:
        W = np.atleast_2d(weights).reshape(-1, self.g.ny, self.g.nx)
        af = self._ev @ W @ self._eu_t
        power = (af.real ** 2 + af.imag ** 2)[:, self._mask]
        pmax = power.max(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = np.maximum(10.0 * np.log10(power / pmax), DB_FLOOR)
        deficit = np.maximum(0.0, self._floor - gain[:, self._in_main])
        excess = np.maximum(0.0, gain[:, self._masked] - self._ceiling)
        cost = np.einsum("ij,ij->i", deficit, deficit) + np.einsum("ij,ij->i", excess, excess)
        cost[~(pmax[:, 0] > 0)] = np.inf
        return cost


def template_cost_batch(g: ArrayGeometry, weights: np.ndarray, raster: Raster,
                        t: BeamTemplate, steering: Direction) -> np.ndarray:
    return TemplateEvaluator(g, raster, t, steering)(weights)


def _raster_spans(raster: Raster, r: Rect, steering: Direction) -> bool:
    tol = 1e-12
    return (raster.u_axis[0] - tol <= r.u_lo + steering.u and r.u_hi + steering.u <= raster.u_axis[-1] + tol
            and raster.v_axis[0] - tol <= r.v_lo + steering.v and r.v_hi + steering.v <= raster.v_axis[-1] + tol)


def half_power_beamwidth(p: BeamPattern, axis: str, level_db: float = -3.0) -> float:
    """Width (in direction cosine) of the ``level_db`` interval around the peak.

    Measured along the raster line through the peak; crossings are linearly
    interpolated in dB between neighboring samples.
    """
    if axis not in ("u", "v"):
        raise ValueError("axis must be 'u' or 'v'")
    pk = p.peak_index
    if axis == "u":
        on_line = np.abs(p.v - p.v[pk]) <= 1e-12
        coord = p.u
    else:
        on_line = np.abs(p.u - p.u[pk]) <= 1e-12
        coord = p.v
    idx = np.flatnonzero(on_line)
    order = idx[np.argsort(coord[idx], kind="stable")]
    xs, gs = coord[order], p.gain_db[order]
    k = int(np.flatnonzero(order == pk)[0])

    def crossing(step):
        j = k
        while 0 <= j + step < len(xs):
            if gs[j + step] < level_db:
                g0, g1 = gs[j], gs[j + step]
                f = (g0 - level_db) / (g0 - g1)
                return xs[j] + f * (xs[j + step] - xs[j])
            j += step
        raise ResolutionError(f"{level_db} dB contour along {axis} not bracketed by the raster")

    return float(crossing(1) - crossing(-1))


def first_sidelobe_db(p: BeamPattern, axis: str = "u") -> float:
    """Level of the first local maximum beyond the mainlobe along ``axis``."""
    pk = p.peak_index
    on_line = np.abs((p.v if axis == "u" else p.u) - (p.v if axis == "u" else p.u)[pk]) <= 1e-12
    coord = p.u if axis == "u" else p.v
    idx = np.flatnonzero(on_line)
    order = idx[np.argsort(coord[idx], kind="stable")]
    gs = p.gain_db[order]
    k = int(np.flatnonzero(order == pk)[0])
    j = k
    while j + 1 < len(gs) and gs[j + 1] <= gs[j]:
        j += 1
    while j + 1 < len(gs) and gs[j + 1] >= gs[j]:
        j += 1
    if j + 1 >= len(gs):
        raise ResolutionError("no sidelobe found on the raster")
    return float(gs[j])
