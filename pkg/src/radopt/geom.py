"""Direction-cosine geometry and the surveillance grid.

Angle convention (vertical planar face, boresight at u = v = 0)::

    u = cos(el) * sin(az)
    v = sin(el)

The grid is uniform in (u, v), not in angle, because beam shapes of a planar
array are translation-invariant in direction-cosine space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

from .errors import DomainError, InstanceError

_DISK_TOL = 1e-12

Profile = Union[float, Callable[["Direction"], float]]


@dataclass(frozen=True)
class Direction:
    u: float
    v: float

    def __post_init__(self):
        if self.u * self.u + self.v * self.v > 1.0 + _DISK_TOL:
            raise DomainError(f"direction ({self.u}, {self.v}) outside the visible unit disk")

    @property
    def cos_theta(self) -> float:
        """Cosine of the angle off boresight (projected-aperture factor)."""
        return math.sqrt(max(0.0, 1.0 - self.u * self.u - self.v * self.v))


@dataclass(frozen=True)
class Sector:
    """Azimuth/elevation box in degrees."""

    az_min: float
    az_max: float
    el_min: float
    el_max: float

    def __post_init__(self):
        if not (self.az_min <= self.az_max and self.el_min <= self.el_max):
            raise DomainError(f"empty sector {self}")
        for a in (self.az_min, self.az_max, self.el_min, self.el_max):
            if abs(a) > 90.0:
                raise DomainError(f"sector bound {a} outside [-90, 90] degrees")

    def contains_angles(self, az_deg: float, el_deg: float, tol: float = 1e-9) -> bool:
        return (self.az_min - tol <= az_deg <= self.az_max + tol
                and self.el_min - tol <= el_deg <= self.el_max + tol)

    def contains(self, d: Direction) -> bool:
        az, el = angles_from_dir(d)
        return self.contains_angles(az, el)

    def uv_bounds(self) -> tuple[float, float, float, float]:
        """Bounding box (u_lo, u_hi, v_lo, v_hi) of the sector image."""
        el_lo, el_hi = math.radians(self.el_min), math.radians(self.el_max)
        cos_vals = [math.cos(el_lo), math.cos(el_hi)]
        if el_lo <= 0.0 <= el_hi:
            cos_vals.append(1.0)
        s_lo, s_hi = math.sin(math.radians(self.az_min)), math.sin(math.radians(self.az_max))
        u_cands = [c * s for c in cos_vals for s in (s_lo, s_hi)]
        return min(u_cands), max(u_cands), math.sin(el_lo), math.sin(el_hi)

    def uv_area(self, n: int = 20001) -> float:
        """Area of the sector image in (u, v), by Simpson quadrature over v."""
        _, _, v_lo, v_hi = self.uv_bounds()
        if v_hi <= v_lo:
            return 0.0
        n += (n + 1) % 2
        h = (v_hi - v_lo) / (n - 1)
        width = math.sin(math.radians(self.az_max)) - math.sin(math.radians(self.az_min))
        total = 0.0
        for i in range(n):
            v = v_lo + i * h
            f = width * math.sqrt(max(0.0, 1.0 - v * v))
            w = 1 if i in (0, n - 1) else (4 if i % 2 else 2)
            total += w * f
        return total * h / 3.0


@dataclass(frozen=True)
class GridCell:
    id: int
    center: Direction
    half_width_u: float
    half_width_v: float
    required_range_m: float
    max_revisit_s: float

    def __post_init__(self):
        if self.half_width_u <= 0 or self.half_width_v <= 0:
            raise DomainError("cell half widths must be positive")
        if self.required_range_m <= 0 or self.max_revisit_s <= 0:
            raise DomainError("cell range and revisit requirements must be positive")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        c = self.center
        return (c.u - self.half_width_u, c.u + self.half_width_u,
                c.v - self.half_width_v, c.v + self.half_width_v)

    @property
    def area(self) -> float:
        return 4.0 * self.half_width_u * self.half_width_v


@dataclass(frozen=True)
class SteeringGrid:
    cells: tuple[GridCell, ...]
    sector: Sector
    res_u: float = field(default=0.0)
    res_v: float = field(default=0.0)

    def __post_init__(self):
        ids = [c.id for c in self.cells]
        if ids != list(range(len(ids))):
            raise InstanceError("grid cell ids must be 0..n-1 in order")

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def with_ranges(self, ranges) -> "SteeringGrid":
        """Copy of the grid with per-cell required ranges replaced."""
        cells = tuple(
            GridCell(c.id, c.center, c.half_width_u, c.half_width_v, float(r), c.max_revisit_s)
            for c, r in zip(self.cells, ranges)
        )
        return SteeringGrid(cells, self.sector, self.res_u, self.res_v)

    def to_dict(self) -> dict:
        return {
            "sector": [self.sector.az_min, self.sector.az_max, self.sector.el_min, self.sector.el_max],
            "res_u": self.res_u,
            "res_v": self.res_v,
            "cells": [
                {"id": c.id, "u": c.center.u, "v": c.center.v,
                 "half_width_u": c.half_width_u, "half_width_v": c.half_width_v,
                 "required_range_m": c.required_range_m, "max_revisit_s": c.max_revisit_s}
                for c in self.cells
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SteeringGrid":
        cells = tuple(
            GridCell(c["id"], Direction(c["u"], c["v"]), c["half_width_u"], c["half_width_v"],
                     c["required_range_m"], c["max_revisit_s"])
            for c in data["cells"]
        )
        return cls(cells, Sector(*data["sector"]), data["res_u"], data["res_v"])


def dir_from_angles(az_deg: float, el_deg: float) -> Direction:
    if abs(az_deg) > 90.0 or abs(el_deg) > 90.0:
        raise DomainError(f"angles ({az_deg}, {el_deg}) outside [-90, 90] degrees")
    az, el = math.radians(az_deg), math.radians(el_deg)
    u = math.cos(el) * math.sin(az)
    v = math.sin(el)
    # guard the rim against rounding just outside the disk
    r2 = u * u + v * v
    if r2 > 1.0:
        s = 1.0 / math.sqrt(r2)
        u, v = u * s, v * s
    return Direction(u, v)


def angles_from_dir(d: Direction) -> tuple[float, float]:
    v = min(1.0, max(-1.0, d.v))
    el = math.asin(v)
    c = math.cos(el)
    if c < 1e-15:
        return 0.0, math.degrees(el)
    s = min(1.0, max(-1.0, d.u / c))
    return math.degrees(math.asin(s)), math.degrees(el)


def cell_contains(cell: GridCell, d: Direction) -> bool:
    return (abs(d.u - cell.center.u) <= cell.half_width_u
            and abs(d.v - cell.center.v) <= cell.half_width_v)


def _profile_value(profile: Profile, d: Direction) -> float:
    return float(profile(d)) if callable(profile) else float(profile)


def build_grid(sector: Sector, res_u: float, res_v: float,
               range_profile: Profile, revisit_profile: Profile,
               clip: str = "center") -> SteeringGrid:
    """Tile the sector image uniformly in (u, v).

    The tiling is centered on the bounding box of the sector image. With
    ``clip="center"`` a cell is kept iff its center lies inside both the
    sector image and the unit disk; kept cells retain their full rectangle.
    ``clip="inside"`` keeps only cells whose whole rectangle lies inside
    the sector image and the disk, so the kept area never exceeds the image
    area.

    Cell ids run row-major from the lowest v row upward.
    """
    if res_u <= 0 or res_v <= 0:
        raise DomainError("grid resolution must be positive")
    if clip not in ("center", "inside"):
        raise ValueError(f"unknown clip rule {clip!r}")
    u_lo, u_hi, v_lo, v_hi = sector.uv_bounds()
    n_u = max(1, math.ceil((u_hi - u_lo) / res_u - 1e-9))
    n_v = max(1, math.ceil((v_hi - v_lo) / res_v - 1e-9))
    u0 = 0.5 * (u_lo + u_hi) - 0.5 * n_u * res_u
    v0 = 0.5 * (v_lo + v_hi) - 0.5 * n_v * res_v
    hu, hv = 0.5 * res_u, 0.5 * res_v

    def inside(u, v):
        if u * u + v * v > 1.0 + _DISK_TOL:
            return False
        return sector.contains(Direction(u, v) if u * u + v * v <= 1.0 else _rim(u, v))

    cells = []
    for j in range(n_v):
        v = v0 + (j + 0.5) * res_v
        for i in range(n_u):
            u = u0 + (i + 0.5) * res_u
            if clip == "center":
                keep = inside(u, v)
            else:
                keep = all(inside(u + su * hu, v + sv * hv)
                           for su in (-1, 1) for sv in (-1, 1)) and _edges_inside(sector, u, v, hu, hv)
            if not keep:
                continue
            center = Direction(u, v) if u * u + v * v <= 1.0 else _rim(u, v)
            cells.append(GridCell(len(cells), center, hu, hv,
                                  _profile_value(range_profile, center),
                                  _profile_value(revisit_profile, center)))
    if not cells:
        raise InstanceError(f"grid over {sector} at resolution ({res_u}, {res_v}) is empty")
    return SteeringGrid(tuple(cells), sector, res_u, res_v)


def _rim(u, v):
    s = 1.0 / math.sqrt(u * u + v * v)
    return Direction(u * s, v * s)


def _edges_inside(sector, u, v, hu, hv, n=16):
    # the image boundary is curved; sample the rectangle's edges, not just corners
    for k in range(n + 1):
        t = -1.0 + 2.0 * k / n
        for pu, pv in ((u + t * hu, v - hv), (u + t * hu, v + hv), (u - hu, v + t * hv), (u + hu, v + t * hv)):
            if pu * pu + pv * pv > 1.0 + _DISK_TOL:
                return False
            d = Direction(pu, pv) if pu * pu + pv * pv <= 1.0 else _rim(pu, pv)
            if not sector.contains(d):
                return False
    return True


def cells_overlap(a: GridCell, b: GridCell) -> bool:
    """Open-interior intersection test."""
    au0, au1, av0, av1 = a.bounds
    bu0, bu1, bv0, bv1 = b.bounds
    eps = 1e-12
    return (min(au1, bu1) - max(au0, bu0) > eps) and (min(av1, bv1) - max(av0, bv0) > eps)
