"""Digital-twin loop: end-to-end mode design, budget accounting, failure
injection and re-planning.

Pipeline stages: (1) synthesize every catalog beam at boresight, (2) pick
one waveform per (beam, required range) regime, (3) lay dwell candidates
on a steering lattice aligned with the grid, (4) build the set-cover
instance, (5) solve it by branch-and-bound, (6) account the frame time.

Random streams: every stage draws its own 64-bit seed from
``SeedSequence(seed, spawn_key=(stage, index))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .array import (ArrayGeometry, BeamTemplate, ExcitationVector, Raster, half_power_beamwidth,
                    pattern_on_raster)
from .beamsynth import synthesize_beam
from .cmaes import CmaConfig
from .errors import DomainError, PipelineError, WaveformInfeasibleError
from .geom import Direction, SteeringGrid
from .scanopt import (CoverInstance, DwellCandidate, ScanPattern, branch_and_bound, build_cover_instance,
                      lp_relaxation, verify_cover)
from .scenario import Scenario
from .wavopt import (Waveform, detection_range, dwell_time_us, optimize_waveform, pd_binary,
                     pd_single_burst, snr_single_burst)

STAGE_BEAM, STAGE_FAILURE = 1, 2
# two-way -3 dB footprint = one-way -1.5 dB (two-way pattern is the one-way pattern squared)
FOOTPRINT_ONE_WAY_DB = -1.5
CUT_SAMPLES = 4001


def stream_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class BeamDesign:
    name: str
    template: BeamTemplate
    excitation: ExcitationVector
    footprint_u: float      # two-way -3 dB width in u
    footprint_v: float
    gain_dbi: float         # one-way directive gain at boresight
    synth_cost: float
    synth_initial_cost: float
    synth_evals: int
    convergence: tuple = field(default=(), repr=False, compare=False)  # (gen, evals, best, sigma)

    @property
    def edge_gain_dbi(self) -> float:
        return self.gain_dbi + FOOTPRINT_ONE_WAY_DB


@dataclass(frozen=True)
class WaveformDesign:
    beam: str
    required_range_m: float
    design_gain_dbi: float
    waveform: Optional[Waveform]
    cost_us: int = 0
    reach_m: float = 0.0           # detection range at boresight footprint edge
    infeasible: Optional[dict] = None

    @property
    def key(self) -> str:
        return f"{self.beam}@{self.required_range_m:g}"


@dataclass(frozen=True)
class BudgetReport:
    frame_time_us: int
    min_revisit_s: float
    budget_fraction: float

    @property
    def frame_time_s(self) -> float:
        return self.frame_time_us / 1e6

    @property
    def available_s(self) -> float:
        return self.budget_fraction * self.min_revisit_s

    @property
    def occupancy(self) -> float:
        return self.frame_time_s / self.available_s

    @property
    def per_cell_revisit_ok(self) -> bool:
        # sequential frames: every cell is revisited once per frame
        return self.frame_time_s <= self.available_s

    @property
    def headroom_s(self) -> float:
        return self.available_s - self.frame_time_s

    def to_dict(self) -> dict:
        return {"frame_time_s": self.frame_time_s, "occupancy": self.occupancy,
                "per_cell_revisit_ok": self.per_cell_revisit_ok, "headroom_s": self.headroom_s,
                "min_revisit_s": self.min_revisit_s, "budget_fraction": self.budget_fraction}


def budget_report(pattern: ScanPattern, grid: SteeringGrid, budget_fraction: float = 1.0) -> BudgetReport:
    return BudgetReport(pattern.total_cost_us, min(c.max_revisit_s for c in grid.cells), budget_fraction)


@dataclass(frozen=True)
class ModeDesign:
    seed: int
    time_s: Optional[float]
    geometry: ArrayGeometry
    grid: SteeringGrid
    beams: tuple
    waveforms: tuple
    instance: CoverInstance
    pattern: ScanPattern
    lp_bound_us: float
    budget: BudgetReport

    def beam(self, name: str) -> BeamDesign:
        return next(b for b in self.beams if b.name == name)

    def waveform(self, key: str) -> WaveformDesign:
        return next(w for w in self.waveforms if w.key == key)

    @property
    def candidates(self) -> dict:
        return {c.id: c for c in self.instance.candidates}

    def selected_candidates(self) -> list:
        cands = self.candidates
        return [cands[i] for i in self.pattern.selected]

    def check(self) -> None:
        if not verify_cover(self.instance, self.pattern):
            raise PipelineError("solve", "pattern does not verify against its instance")
        beams = {b.name for b in self.beams}
        wfs = {w.key for w in self.waveforms if w.waveform is not None}
        for c in self.selected_candidates():
            if c.beam_ref not in beams or c.waveform_ref not in wfs:
                raise PipelineError("assemble", f"candidate {c.id} references a missing beam or waveform")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "time_s": self.time_s,
            "array": {"nx": self.geometry.nx, "ny": self.geometry.ny, "dx": self.geometry.dx,
                      "dy": self.geometry.dy, "n_alive": self.geometry.n_alive,
                      "dead": [i for i, a in enumerate(self.geometry.alive) if not a]},
            "beams": [
                {"name": b.name, "footprint_u": b.footprint_u, "footprint_v": b.footprint_v,
                 "gain_dbi": b.gain_dbi, "synth_cost": b.synth_cost,
                 "synth_initial_cost": b.synth_initial_cost, "synth_evals": b.synth_evals,
                 "amplitude": b.excitation.amplitude.tolist(), "phase": b.excitation.phase.tolist()}
                for b in self.beams],
            "waveforms": [
                {"key": w.key, "beam": w.beam, "required_range_m": w.required_range_m,
                 "design_gain_dbi": w.design_gain_dbi, "cost_us": w.cost_us, "reach_m": w.reach_m,
                 "waveform": w.waveform.to_dict() if w.waveform else None, "infeasible": w.infeasible}
                for w in self.waveforms],
            "pattern": {"selected": list(self.pattern.selected), "total_cost_us": self.pattern.total_cost_us,
                        "optimality": self.pattern.optimality, "gap_us": self.pattern.gap_us,
                        "nodes": self.pattern.nodes, "lp_bound_us": self.lp_bound_us},
            "dwells": [
                {"id": c.id, "beam": c.beam_ref, "waveform": c.waveform_ref, "u": c.steering.u,
                 "v": c.steering.v, "footprint_u": c.beamwidth_u, "footprint_v": c.beamwidth_v,
                 "cost_s": c.cost_s, "detection_range_m": c.detection_range_m,
                 "cells": sorted(self.instance.covers[self.instance.index_of(c.id)])}
                for c in self.selected_candidates()],
            "budget": self.budget.to_dict(),
            "n_cells": len(self.grid.cells),
            "n_candidates": self.instance.n_candidates,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


# -- stage 1: beams ---------------------------------------------------------

def measure_beam(g: ArrayGeometry, w: ExcitationVector) -> tuple[float, float, float]:
    """(footprint_u, footprint_v, gain_dbi) from fine principal-plane cuts."""
    pu = pattern_on_raster(g, w, Raster.box(-1.0, 1.0, 0.0, 0.0, CUT_SAMPLES, 1))
    pv = pattern_on_raster(g, w, Raster.box(0.0, 0.0, -1.0, 1.0, 1, CUT_SAMPLES))
    fu = half_power_beamwidth(pu, "u", FOOTPRINT_ONE_WAY_DB)
    fv = half_power_beamwidth(pv, "v", FOOTPRINT_ONE_WAY_DB)
    return fu, fv, max(pu.gain_peak_dbi, pv.gain_peak_dbi)


def design_beams(s: Scenario, g: ArrayGeometry, seed: int, warm: Sequence[BeamDesign] | None = None) -> tuple:
    sv = s.solver
    raster = Raster.default(sv.raster_n)
    out = []
    warm_by_name = {b.name: b for b in warm} if warm else {}
    for i, ts in enumerate(s.templates):
        template = ts.to_template(s.array)
        dim = g.n_alive if sv.phase_only else 2 * g.n_alive
        cfg = CmaConfig(sigma0=sv.cma_sigma0, target_cost=0.0, seed=stream_seed(seed, STAGE_BEAM, i),
                        max_evals=max(int(sv.cma_evals_per_dim * dim), 4 + int(3 * math.log(dim)) + 1))
        start = warm_by_name[ts.name].excitation.masked(g) if ts.name in warm_by_name else None
        if start is not None and not np.any(start.weights):
            start = None
        w, res = synthesize_beam(g, template, Direction(0.0, 0.0), cfg, raster=raster,
                                 warm_start=start, phase_only=sv.phase_only)
        fu, fv, gain = measure_beam(g, w)
        out.append(BeamDesign(ts.name, template, w, fu, fv, gain, res.best_cost, res.history[0], res.evals_used,
                              tuple(res.history_rows())))
    return tuple(out)


# -- stage 2: waveforms -----------------------------------------------------

def design_waveforms(s: Scenario, beams: Sequence[BeamDesign], grid: SteeringGrid) -> tuple:
    params = s.radar.to_params()
    wc = s.waveform_catalog
    catalog = wc.to_catalog(s.radar.carrier_hz)
    ranges = sorted({c.required_range_m for c in grid.cells})
    out = []
    for b in beams:
        for r in ranges:
            # sized for the worst scan loss over the cells of this regime
            worst_cos = min(c.center.cos_theta for c in grid.cells if c.required_range_m == r)
            g_design = b.edge_gain_dbi + 10.0 * math.log10(max(worst_cos, 1e-12))
            try:
                w = optimize_waveform(params, wc.requirement(r), catalog, g_design, wc.max_bursts)
            except WaveformInfeasibleError as e:
                out.append(WaveformDesign(b.name, r, g_design, None, infeasible=e.report.to_dict()))
                continue
            reach = detection_range(params, w, b.edge_gain_dbi, wc.min_pd)
            out.append(WaveformDesign(b.name, r, g_design, w, dwell_time_us(w), reach))
    return tuple(out)


# -- stage 3: candidates ----------------------------------------------------

def lattice_strides(grid: SteeringGrid, beams: Sequence[BeamDesign], stride: float | None) -> tuple[float, float]:
    """Steering strides that divide half the cell size, so lattice points hit
    cell centers and corners. Default: at most half the narrowest footprint."""
    out = []
    for res, fp in ((grid.res_u, min(b.footprint_u for b in beams)),
                    (grid.res_v, min(b.footprint_v for b in beams))):
        half = 0.5 * res
        target = stride if stride is not None else 0.5 * fp
        k = max(1, math.ceil(half / target - 1e-9)) if stride is None else max(1, round(half / target))
        out.append(half / k)
    return out[0], out[1]


def steering_lattice(grid: SteeringGrid, beams: Sequence[BeamDesign], stride: float | None) -> list:
    su, sv = lattice_strides(grid, beams, stride)
    anchor = grid.cells[0].center
    reach_u = max(b.footprint_u for b in beams) / 2
    reach_v = max(b.footprint_v for b in beams) / 2
    u_lo = min(c.bounds[0] for c in grid.cells) - reach_u
    u_hi = max(c.bounds[1] for c in grid.cells) + reach_u
    v_lo = min(c.bounds[2] for c in grid.cells) - reach_v
    v_hi = max(c.bounds[3] for c in grid.cells) + reach_v
    pts = []
    for j in range(math.floor((v_lo - anchor.v) / sv), math.ceil((v_hi - anchor.v) / sv) + 1):
        v = anchor.v + j * sv
        for i in range(math.floor((u_lo - anchor.u) / su), math.ceil((u_hi - anchor.u) / su) + 1):
            u = anchor.u + i * su
            if u * u + v * v <= 1.0:
                pts.append(Direction(u, v))
    return pts


def generate_candidates(beams: Sequence[BeamDesign], waveforms: Sequence[WaveformDesign],
                        lattice: Sequence[Direction]) -> list:
    out = []
    for b in beams:
        for wd in waveforms:
            if wd.beam != b.name or wd.waveform is None:
                continue
            for d in lattice:
                # R^4 ∝ G^2 and G ∝ cos(theta): reach scales with sqrt(cos(theta))
                reach = wd.reach_m * math.sqrt(d.cos_theta)
                out.append(DwellCandidate(len(out), d, b.footprint_u, b.footprint_v, wd.key,
                                          wd.cost_us / 1e6, reach, b.name))
    return out


# -- whole pipeline ---------------------------------------------------------

def _design(s: Scenario, g: ArrayGeometry, grid: SteeringGrid, seed: int, time_s,
            beams: tuple | None = None, warm: Sequence[BeamDesign] | None = None) -> ModeDesign:
    if beams is None:
        beams = design_beams(s, g, seed, warm)
    waveforms = design_waveforms(s, beams, grid)
    lattice = steering_lattice(grid, beams, s.solver.lattice_stride)
    cands = generate_candidates(beams, waveforms, lattice)
    if not cands:
        report = next((w.infeasible for w in waveforms if w.infeasible), None)
        raise PipelineError("waveform", report["binding"] if report else "no waveform",
                            "no regime has a feasible waveform", uncovered=range(len(grid.cells)))
    inst = build_cover_instance(grid, cands)
    if not inst.feasible:
        _raise_uncovered(grid, waveforms, inst.uncovered)
    pattern = branch_and_bound(inst, s.solver.gap_us / 1e6, s.solver.node_cap)
    design = ModeDesign(seed, time_s, g, grid, beams, waveforms, inst, pattern, lp_relaxation(inst).objective_us,
                        budget_report(pattern, grid, s.grid.search_budget_fraction))
    design.check()
    return design


def _raise_uncovered(grid, waveforms, uncovered):
    ranges = {grid.cells[j].required_range_m for j in uncovered}
    for r in sorted(ranges):
        reports = [w.infeasible for w in waveforms if w.required_range_m == r]
        if reports and all(x is not None for x in reports):
            binding = reports[0]["binding"]
            raise PipelineError("waveform", binding,
                                f"no beam has a feasible waveform for {r:g} m", uncovered=uncovered)
    raise PipelineError("cover", "coverage",
                        "cells not contained in any dwell footprint that reaches their range",
                        uncovered=uncovered)


def run_pipeline(s: Scenario, seed: int = 0, beams: Sequence[BeamDesign] | None = None) -> ModeDesign:
    """Nominal mode design (events ignored).

    ``beams`` skips synthesis and reuses previously designed beams; they must
    have been designed for this scenario's array and templates.
    """
    return _design(s, s.geometry(), s.build_grid(), seed, None, beams=None if beams is None else tuple(beams))


# -- failures and re-planning -----------------------------------------------

def inject_failure(g: ArrayGeometry, fraction: float | None = None, elements: Sequence[int] | None = None,
                   seed: int = 0) -> ArrayGeometry:
    """Mark elements dead: an explicit id list, or ``round(fraction * N)``
    elements drawn (seeded) from those still alive."""
    alive = list(g.alive)
    if elements is not None:
        for i in elements:
            if not 0 <= i < g.n_elements:
                raise DomainError(f"element id {i} out of range")
            alive[i] = False
    elif fraction is not None:
        if not 0 <= fraction < 1:
            raise DomainError("failure fraction must lie in [0, 1)")
        k = int(round(fraction * g.n_elements))
        idx = np.flatnonzero(g.alive_mask)
        k = min(k, idx.size)
        rng = np.random.Generator(np.random.PCG64(seed))
        for i in rng.choice(idx, size=k, replace=False):
            alive[int(i)] = False
    if not any(alive):
        raise DomainError("failure would leave no alive element")
    return g.with_alive(alive)


def active_events(s: Scenario, t: float | None) -> list:
    if t is None:
        return []
    return [(i, e) for i, e in enumerate(s.events) if e.time_s <= t]


def state_at(s: Scenario, t: float | None, seed: int) -> tuple[ArrayGeometry, SteeringGrid]:
    """Array and grid after applying every event up to time ``t``."""
    g = s.geometry()
    overrides = []
    for i, e in active_events(s, t):
        if e.kind == "failure":
            g = inject_failure(g, e.fraction_dead, e.elements, stream_seed(seed, STAGE_FAILURE, i))
        else:
            overrides.append((e.sector, e.required_range_m))
    return g, s.build_grid(overrides)


def _candidate_key(c: DwellCandidate, design: ModeDesign) -> str:
    wd = design.waveform(c.waveform_ref)
    sig = ",".join(f"{b.pri_s:.9g}/{b.pulse_width_s:.9g}/{b.n_pulses}" for b in wd.waveform.bursts)
    return f"{c.beam_ref}|{sig}|m{wd.waveform.m}|({c.steering.u:.9f},{c.steering.v:.9f})"


@dataclass
class DeltaReport:
    cause: str
    time_s: float
    old_frame_time_s: float
    new_frame_time_s: Optional[float]
    cells_lost: list = field(default_factory=list)
    cells_gained: list = field(default_factory=list)
    candidates_added: list = field(default_factory=list)
    candidates_removed: list = field(default_factory=list)
    gain_old_dbi: dict = field(default_factory=dict)
    gain_new_dbi: dict = field(default_factory=dict)
    feasible: bool = True
    stage: str = ""
    binding_constraint: str = ""
    detail: str = ""

    @property
    def empty(self) -> bool:
        return (self.feasible and self.new_frame_time_s == self.old_frame_time_s
                and not (self.cells_lost or self.cells_gained or self.candidates_added or self.candidates_removed))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "cause", "time_s", "old_frame_time_s", "new_frame_time_s", "feasible", "stage",
            "binding_constraint", "detail", "cells_lost", "cells_gained", "candidates_added",
            "candidates_removed", "gain_old_dbi", "gain_new_dbi")}

    def text(self) -> str:
        lines = [f"event(s) at t={self.time_s:g} s: {self.cause}"]
        if self.feasible:
            lines.append(f"proposed mode: frame time {self.old_frame_time_s:.6f} s -> {self.new_frame_time_s:.6f} s")
        else:
            lines.append(f"NO FEASIBLE MODE: stage '{self.stage}', binding constraint '{self.binding_constraint}'")
            if self.detail:
                lines.append(f"  {self.detail}")
        for name in self.gain_old_dbi:
            new = self.gain_new_dbi.get(name)
            lines.append(f"beam {name}: gain {self.gain_old_dbi[name]:.2f} dBi -> "
                         + (f"{new:.2f} dBi" if new is not None else "n/a"))
        lines.append(f"cells lost: {self.cells_lost or 'none'}")
        lines.append(f"cells gained: {self.cells_gained or 'none'}")
        lines.append(f"dwells added: {len(self.candidates_added)}, removed: {len(self.candidates_removed)}")
        return "\n".join(lines) + "\n"


def reconfigure(prev: ModeDesign, s: Scenario, t: float, seed: int = 0) -> tuple[Optional[ModeDesign], DeltaReport]:
    """Re-plan the mode for the scenario state at time ``t``.

    Beams are re-synthesized (warm-started from ``prev``) only if the array
    changed; otherwise ``prev``'s beams are reused. ``prev`` is not touched.
    If no mode is feasible the new design is ``None`` and the report names
    the failing stage and binding constraint.
    """
    events = active_events(s, t)
    if not events:
        raise DomainError(f"no failure or threat override active at t={t}")
    prev_t = prev.time_s if prev.time_s is not None else -math.inf
    fresh = [e.kind for _, e in events if e.time_s > prev_t] or [e.kind for _, e in events]
    cause = "+".join(sorted(set(fresh)))

    g, grid = state_at(s, t, seed)
    reuse = g.alive == prev.geometry.alive
    delta = DeltaReport(cause, t, prev.budget.frame_time_s, None,
                        gain_old_dbi={b.name: b.gain_dbi for b in prev.beams})
    old_keys = {_candidate_key(c, prev) for c in prev.selected_candidates()}
    try:
        new = _design(s, g, grid, seed, t, beams=prev.beams if reuse else None, warm=prev.beams)
    except PipelineError as e:
        delta.feasible = False
        delta.stage, delta.binding_constraint, delta.detail = e.stage, e.constraint, e.detail
        delta.cells_lost = list(e.uncovered)
        delta.candidates_removed = sorted(old_keys)
        return None, delta

    delta.new_frame_time_s = new.budget.frame_time_s
    delta.gain_new_dbi = {b.name: b.gain_dbi for b in new.beams}
    new_keys = {_candidate_key(c, new) for c in new.selected_candidates()}
    delta.candidates_added = sorted(new_keys - old_keys)
    delta.candidates_removed = sorted(old_keys - new_keys)
    old_cov = set(np.flatnonzero(evaluate_design(prev, s).covered))
    new_cov = set(np.flatnonzero(evaluate_design(new, s).covered))
    delta.cells_lost = sorted(int(j) for j in old_cov - new_cov)
    delta.cells_gained = sorted(int(j) for j in new_cov - old_cov)
    return new, delta


# -- independent evaluation -------------------------------------------------

@dataclass
class DesignMetrics:
    covered: np.ndarray            # per cell
    n_covering: np.ndarray         # selected dwells covering each cell
    pd_at_required: np.ndarray     # best Pd over covering dwells (0 if none)
    frame_time_s: float
    occupancy: float

    @property
    def uncovered(self) -> list:
        return [int(j) for j in np.flatnonzero(~self.covered)]

    @property
    def full_coverage(self) -> bool:
        return bool(self.covered.all())


def evaluate_design(d: ModeDesign, s: Scenario) -> DesignMetrics:
    """Re-derive coverage, Pd and budget from the scenario, not the solver.

    The grid is rebuilt from the scenario at the design's time; a cell counts
    as covered by a selected dwell when the dwell's footprint contains the
    cell rectangle and the radar equation gives Pd >= min_pd at the cell's
    required range with the footprint-edge gain at that steering.
    """
    grid = s.build_grid([(e.sector, e.required_range_m) for _, e in active_events(s, d.time_s)
                         if e.kind == "threat_override"])
    params = s.radar.to_params()
    min_pd = s.waveform_catalog.min_pd
    lo_u = np.array([c.center.u - c.half_width_u for c in grid.cells])
    hi_u = np.array([c.center.u + c.half_width_u for c in grid.cells])
    lo_v = np.array([c.center.v - c.half_width_v for c in grid.cells])
    hi_v = np.array([c.center.v + c.half_width_v for c in grid.cells])
    req = np.array([c.required_range_m for c in grid.cells])
    n = len(grid.cells)
    covering = np.zeros(n, dtype=int)
    best_pd = np.zeros(n)
    frame_us = 0
    cands = d.candidates
    beams = {b.name: b for b in d.beams}
    for cid in d.pattern.selected:
        c = cands[cid]
        wf = d.waveform(c.waveform_ref).waveform
        frame_us += dwell_time_us(wf)
        s_u, s_v = c.steering.u, c.steering.v
        hu, hv = 0.5 * c.beamwidth_u, 0.5 * c.beamwidth_v
        tol = 1e-12
        inside = ((s_u - hu <= lo_u + tol) & (hi_u <= s_u + hu + tol)
                  & (s_v - hv <= lo_v + tol) & (hi_v <= s_v + hv + tol))
        gain = beams[c.beam_ref].edge_gain_dbi + 10.0 * math.log10(max(c.steering.cos_theta, 1e-12))
        for j in np.flatnonzero(inside):
            pds = [pd_single_burst(snr_single_burst(params, b, req[j], gain), params.pfa, params.fluctuation)
                   for b in wf.bursts]
            pd = pd_binary(pds, wf.m)
            if pd >= min_pd:
                covering[j] += 1
            best_pd[j] = max(best_pd[j], pd)
    frame_s = frame_us / 1e6
    available = s.grid.search_budget_fraction * min(c.max_revisit_s for c in grid.cells)
    return DesignMetrics(covering > 0, covering, best_pd, frame_s, frame_s / available)


def without_dwell(d: ModeDesign, cand_id: int) -> ModeDesign:
    """Copy of ``d`` with one selected dwell removed (what-if helper)."""
    sel = tuple(i for i in d.pattern.selected if i != cand_id)
    cost = sum(d.instance.costs_us[d.instance.index_of(i)] for i in sel)
    pattern = replace(d.pattern, selected=sel, total_cost_us=cost, optimality="greedy")
    return replace(d, pattern=pattern, budget=budget_report(pattern, d.grid, d.budget.budget_fraction))
