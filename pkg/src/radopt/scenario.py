"""Scenario file schema (JSON) and conversion to toolkit objects.

A scenario has the top-level sections ``grid``, ``array``, ``radar``,
``templates``, ``waveform_catalog``, ``solver`` and ``events``. Unknown keys
anywhere are rejected. The README annotates every field; see
``scenarios/desk.json`` in the repository for a complete instance.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import geom
from .array import ArrayGeometry, BeamTemplate, pencil_template
from .beamsynth import widen_template
from .wavopt import Burst, RadarParams, WaveformRequirement


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SectorSpec(_Strict):
    az_min: float = Field(ge=-90, le=90)
    az_max: float = Field(ge=-90, le=90)
    el_min: float = Field(ge=-90, le=90)
    el_max: float = Field(ge=-90, le=90)

    @model_validator(mode="after")
    def _ordered(self):
        if self.az_min > self.az_max or self.el_min > self.el_max:
            raise ValueError("sector bounds must satisfy min <= max")
        return self

    def to_sector(self) -> geom.Sector:
        return geom.Sector(self.az_min, self.az_max, self.el_min, self.el_max)


class ZoneSpec(_Strict):
    """Sub-sector with its own range and/or revisit requirement."""

    sector: SectorSpec
    required_range_m: Optional[float] = Field(default=None, gt=0)
    max_revisit_s: Optional[float] = Field(default=None, gt=0)


class GridSpec(_Strict):
    sector: SectorSpec
    res_u: float = Field(gt=0)
    res_v: float = Field(gt=0)
    required_range_m: float = Field(gt=0)
    max_revisit_s: float = Field(gt=0)
    zones: List[ZoneSpec] = []
    search_budget_fraction: float = Field(default=1.0, gt=0, le=1)
    clip: Literal["center", "inside"] = "center"


class ArraySpec(_Strict):
    nx: int = Field(ge=1)
    ny: int = Field(ge=1)
    dx: float = Field(default=0.5, gt=0)
    dy: float = Field(default=0.5, gt=0)
    dead_elements: List[int] = []

    @model_validator(mode="after")
    def _valid_dead(self):
        n = self.nx * self.ny
        if any(not 0 <= i < n for i in self.dead_elements):
            raise ValueError("dead element index out of range")
        if len(set(self.dead_elements)) >= n:
            raise ValueError("every element is dead")
        return self

    def to_geometry(self) -> ArrayGeometry:
        alive = [True] * (self.nx * self.ny)
        for i in self.dead_elements:
            alive[i] = False
        return ArrayGeometry(self.nx, self.ny, self.dx, self.dy, tuple(alive))


class RadarSpec(_Strict):
    peak_power_w: float = Field(gt=0)
    system_losses_db: float = Field(default=6.0, ge=0)
    noise_figure_db: float = Field(default=5.0, ge=0)
    target_rcs_m2: float = Field(default=1.0, gt=0)
    pfa: float = Field(default=1e-6, gt=0, lt=1)
    fluctuation: Literal["steady", "swerling1"] = "swerling1"
    carrier_hz: float = Field(default=3e9, gt=0)

    def to_params(self) -> RadarParams:
        return RadarParams(self.peak_power_w, self.system_losses_db, self.noise_figure_db,
                           self.target_rcs_m2, self.pfa, self.fluctuation)


class TemplateSpec(_Strict):
    """Pencil template, optionally widened.

    Null mainlobe half-widths default to half the uniform-array -3 dB
    beamwidth (0.443 / (n * d)); null mask starts default to 1.25 / (n * d),
    just past the first null of the uniform array.
    """

    name: str
    mainlobe_half_u: Optional[float] = Field(default=None, gt=0)
    mainlobe_half_v: Optional[float] = Field(default=None, gt=0)
    min_gain_db: float = Field(default=-3.0, le=0)
    mask_start_u: Optional[float] = Field(default=None, gt=0)
    mask_start_v: Optional[float] = Field(default=None, gt=0)
    sidelobe_db: float = Field(default=-20.0, lt=0)
    widen_u: float = Field(default=1.0, ge=1)
    widen_v: float = Field(default=1.0, ge=1)

    def to_template(self, arr: ArraySpec) -> BeamTemplate:
        au, av = arr.nx * arr.dx, arr.ny * arr.dy
        hu = self.mainlobe_half_u if self.mainlobe_half_u is not None else 0.443 / au
        hv = self.mainlobe_half_v if self.mainlobe_half_v is not None else 0.443 / av
        su = self.mask_start_u if self.mask_start_u is not None else max(1.25 / au, hu)
        sv = self.mask_start_v if self.mask_start_v is not None else max(1.25 / av, hv)
        t = pencil_template(hu, hv, self.min_gain_db, su, sv, self.sidelobe_db)
        if self.widen_u != 1.0 or self.widen_v != 1.0:
            t = widen_template(t, self.widen_u, self.widen_v)
        return t


class BurstSpec(_Strict):
    pri_s: float = Field(gt=0)
    pulse_width_s: float = Field(gt=0)
    n_pulses: int = Field(ge=1)


class WaveformCatalogSpec(_Strict):
    bursts: List[BurstSpec] = Field(min_length=1)
    velocity_span_mps: Tuple[float, float] = (-300.0, 300.0)
    notch_width_hz: float = Field(default=200.0, ge=0)
    min_pd: float = Field(default=0.8, ge=0, le=1)
    clear_fraction: float = Field(default=0.8, ge=0, le=1)
    min_m: int = Field(default=1, ge=1)
    max_bursts: int = Field(default=4, ge=1)
    n_range: int = Field(default=512, ge=1)
    n_velocity: int = Field(default=101, ge=1)

    def to_catalog(self, carrier_hz: float) -> list:
        return [Burst(b.pri_s, b.pulse_width_s, b.n_pulses, carrier_hz) for b in self.bursts]

    def requirement(self, required_range_m: float) -> WaveformRequirement:
        return WaveformRequirement(required_range_m, tuple(self.velocity_span_mps), self.min_pd,
                                   self.clear_fraction, self.notch_width_hz, self.min_m,
                                   self.n_range, self.n_velocity)


class SolverSpec(_Strict):
    gap_us: int = Field(default=0, ge=0)
    node_cap: int = Field(default=20000, ge=1)
    cma_evals_per_dim: float = Field(default=20.0, gt=0)
    cma_sigma0: float = Field(default=0.2, gt=0)
    raster_n: int = Field(default=129, ge=9)
    lattice_stride: Optional[float] = Field(default=None, gt=0)
    phase_only: bool = False


class EventSpec(_Strict):
    time_s: float = Field(ge=0)
    kind: Literal["failure", "threat_override"]
    fraction_dead: Optional[float] = Field(default=None, ge=0, lt=1)
    elements: Optional[List[int]] = None
    sector: Optional[SectorSpec] = None
    required_range_m: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _consistent(self):
        if self.kind == "failure":
            if (self.fraction_dead is None) == (self.elements is None):
                raise ValueError("failure event needs exactly one of fraction_dead / elements")
        elif self.sector is None or self.required_range_m is None:
            raise ValueError("threat_override event needs sector and required_range_m")
        return self


class Scenario(_Strict):
    grid: GridSpec
    array: ArraySpec
    radar: RadarSpec
    templates: List[TemplateSpec] = Field(min_length=1)
    waveform_catalog: WaveformCatalogSpec
    solver: SolverSpec = SolverSpec()
    events: List[EventSpec] = []

    @model_validator(mode="after")
    def _unique_names(self):
        names = [t.name for t in self.templates]
        if len(set(names)) != len(names):
            raise ValueError("template names must be unique")
        return self

    def geometry(self) -> ArrayGeometry:
        return self.array.to_geometry()

    def build_grid(self, overrides=()) -> geom.SteeringGrid:
        """Grid with zone requirements applied, then ``overrides`` in order.

        ``overrides`` is a sequence of (SectorSpec, required_range_m).
        """
        g = self.grid
        layers = [(z.sector.to_sector(), z.required_range_m, z.max_revisit_s) for z in g.zones]
        layers += [(s.to_sector(), r, None) for s, r in overrides]

        def rule(field_default, pick):
            def f(d):
                val = field_default
                for sector, rng, rev in layers:
                    new = pick(rng, rev)
                    if new is not None and sector.contains(d):
                        val = new
                return val
            return f

        return geom.build_grid(g.sector.to_sector(), g.res_u, g.res_v,
                               rule(g.required_range_m, lambda r, _: r),
                               rule(g.max_revisit_s, lambda _, v: v), clip=g.clip)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; raises ``ScenarioError``."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario file {p}: {e.strerror or e}") from e
    try:
        return Scenario.model_validate(json.loads(text))
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{p}: invalid JSON: {e}") from e
    except ValidationError as e:
        raise ScenarioError(f"{p}: invalid scenario:\n{e}") from e


class ScenarioError(ValueError):
    pass
