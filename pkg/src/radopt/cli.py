"""Command-line front end.

Subcommands ``beam``, ``wave``, ``scan``, ``pipeline`` and ``whatif`` share
the flags ``--scenario --out --seed --gap-us --node-cap --evals-per-dim
--emit-heatmaps --quiet``. Exit codes: 0 success, 1 usage or configuration
error, 2 infeasible or diverged (reports are still written).

Randomness: the single ``--seed`` (default 0) is split per stage with
``numpy.random.SeedSequence(seed, spawn_key=(stage, index))``.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import io, twin
from .array import Raster, pattern_on_raster
from .errors import DivergenceError, DomainError, InstanceError, PipelineError, RadOptError
from .scanopt import (branch_and_bound, build_cover_instance, format_instance, format_pattern, lp_relaxation,
                      parse_instance)
from .scenario import Scenario, ScenarioError, load_scenario
from .wavopt import visibility_map

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2
HEATMAP_RASTER_N = 129
HEATMAP_FLOOR_DB = -60.0


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    scenario_path: Optional[Path]
    output_dir: Path
    seed: int = 0
    gap_us: Optional[int] = None
    node_cap: Optional[int] = None
    evals_per_dim: Optional[float] = None
    emit_heatmaps: bool = False
    quiet: bool = False
    instance_path: Optional[Path] = None


class _Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = cfg.output_dir

    def say(self, msg: str) -> None:
        if not self.cfg.quiet:
            print(msg)

    @staticmethod
    def warn(msg: str) -> None:
        print(f"warning: {msg}", file=sys.stderr)

    def path(self, name: str) -> Path:
        return self.out / name

    def scenario(self) -> Scenario:
        if self.cfg.scenario_path is None:
            raise ScenarioError("--scenario is required for this subcommand")
        s = load_scenario(self.cfg.scenario_path)
        upd = {k: v for k, v in (("gap_us", self.cfg.gap_us), ("node_cap", self.cfg.node_cap),
                                 ("cma_evals_per_dim", self.cfg.evals_per_dim)) if v is not None}
        if upd:
            solver = s.solver.model_validate({**s.solver.model_dump(), **upd})
            s = s.model_copy(update={"solver": solver})
        return s


# -- artifact writers -------------------------------------------------------

def _write_beam(run: _Run, g, b: twin.BeamDesign, heatmap: bool = True) -> None:
    name = b.name
    best = np.minimum.accumulate([c for _, _, c, _ in b.convergence]) if b.convergence else []
    io.write_csv(run.path(f"beam_{name}_convergence.csv"),
                 ["generation", "evals", "generation_best", "best_so_far", "sigma"],
                 ((k, e, c, m, sg) for (k, e, c, sg), m in zip(b.convergence, best)))
    idx = np.arange(g.n_elements)
    io.write_csv(run.path(f"beam_{name}_excitation.csv"),
                 ["element", "ix", "iy", "alive", "amplitude", "phase_rad"],
                 zip(idx, idx % g.nx, idx // g.nx, g.alive, b.excitation.amplitude, b.excitation.phase))
    if heatmap:
        p = pattern_on_raster(g, b.excitation, Raster.default(HEATMAP_RASTER_N))
        io.write_pgm(run.path(f"beam_{name}_pattern.pgm"), io.pattern_image(p, HEATMAP_FLOOR_DB),
                     HEATMAP_FLOOR_DB, 0.0)
        io.write_csv(run.path(f"beam_{name}_pattern.csv"), ["u", "v", "gain_db"], zip(p.u, p.v, p.gain_db))


def _write_waveforms(run: _Run, s: Scenario, waveforms, heatmaps: bool) -> None:
    wc = s.waveform_catalog
    rows = []
    for w in waveforms:
        doc = {"key": w.key, "beam": w.beam, "required_range_m": w.required_range_m,
               "design_gain_dbi": w.design_gain_dbi}
        if w.waveform is None:
            doc["infeasible"] = w.infeasible
            rows.append((w.key, w.beam, w.required_range_m, w.design_gain_dbi, False, 0, 0, "", 0, 0.0,
                         w.infeasible["binding"]))
        else:
            wf = w.waveform
            req = wc.requirement(w.required_range_m)
            ranges, vels = req.axes()
            vm = visibility_map(wf, ranges, vels, wc.notch_width_hz)
            doc.update(waveform=wf.to_dict(), dwell_us=w.cost_us, reach_m=w.reach_m,
                       clear_fraction=vm.clear_fraction)
            rows.append((w.key, w.beam, w.required_range_m, w.design_gain_dbi, True, len(wf.bursts), wf.m,
                         [round(b.pri_s * 1e6, 6) for b in wf.bursts], w.cost_us, w.reach_m, ""))
            tag = w.key.replace("@", "_")
            io.write_csv(run.path(f"visibility_{tag}.csv"), ["range_m", "velocity_mps", "n_visible", "clear"],
                         ((r, v, int(vm.visible[i, j]), bool(vm.clear[i, j]))
                          for i, r in enumerate(ranges) for j, v in enumerate(vels)))
            if heatmaps:
                # rows: far range at the top; columns: velocity
                io.write_pgm(run.path(f"visibility_{tag}.pgm"), vm.visible[::-1].astype(float),
                             0.0, float(len(wf.bursts)))
        io.write_json(run.path(f"waveform_{w.key.replace('@', '_')}.json"), doc)
    io.write_csv(run.path("waveforms.csv"),
                 ["key", "beam", "required_range_m", "design_gain_dbi", "feasible", "n_bursts", "m",
                  "pri_us", "dwell_us", "reach_m", "binding"], rows)


def _write_design(run: _Run, d: twin.ModeDesign, s: Scenario, prefix: str = "") -> None:
    io.write_json(run.path(f"{prefix}design.json"), d.to_dict())
    run.path(f"{prefix}instance.txt").write_text(format_instance(d.instance))
    run.path(f"{prefix}pattern.txt").write_text(format_pattern(d.pattern, d.lp_bound_us))
    inst = d.instance
    io.write_csv(run.path(f"{prefix}dwells.csv"),
                 ["id", "beam", "waveform", "u", "v", "footprint_u", "footprint_v", "cost_s",
                  "detection_range_m", "n_cells"],
                 ((c.id, c.beam_ref, c.waveform_ref, c.steering.u, c.steering.v, c.beamwidth_u, c.beamwidth_v,
                   c.cost_s, c.detection_range_m, len(inst.covers[inst.index_of(c.id)]))
                  for c in d.selected_candidates()))
    m = twin.evaluate_design(d, s)
    io.write_csv(run.path(f"{prefix}cells.csv"),
                 ["cell", "u", "v", "half_width_u", "half_width_v", "required_range_m", "max_revisit_s",
                  "covered", "n_covering", "pd"],
                 ((c.id, c.center.u, c.center.v, c.half_width_u, c.half_width_v, c.required_range_m,
                   c.max_revisit_s, bool(m.covered[c.id]), int(m.n_covering[c.id]), m.pd_at_required[c.id])
                  for c in d.grid.cells))
    b = d.budget
    io.write_csv(run.path(f"{prefix}budget.csv"),
                 ["frame_time_s", "occupancy", "per_cell_revisit_ok", "headroom_s", "min_revisit_s",
                  "budget_fraction", "optimality", "gap_s", "lp_bound_s"],
                 [(b.frame_time_s, b.occupancy, b.per_cell_revisit_ok, b.headroom_s, b.min_revisit_s,
                   b.budget_fraction, d.pattern.optimality, d.pattern.gap_us / 1e6, d.lp_bound_us / 1e6)])


def _write_pipeline_error(run: _Run, e: PipelineError, name: str = "error.json") -> None:
    io.write_json(run.path(name), {"stage": e.stage, "constraint": e.constraint, "detail": e.detail,
                                   "uncovered": list(e.uncovered)})


# -- subcommands ------------------------------------------------------------

def cmd_beam(run: _Run) -> int:
    s = run.scenario()
    g = s.geometry()
    beams = twin.design_beams(s, g, run.cfg.seed)
    for b in beams:
        _write_beam(run, g, b)
        run.say(f"beam {b.name}: cost {b.synth_initial_cost:.6g} -> {b.synth_cost:.6g} in {b.synth_evals} evals, "
                f"gain {b.gain_dbi:.2f} dBi, footprint {b.footprint_u:.4f} x {b.footprint_v:.4f}")
        if b.synth_cost > 0:
            run.warn(f"template '{b.name}' not met; best-effort excitation kept (residual cost {b.synth_cost:.6g})")
    return EXIT_OK


def cmd_wave(run: _Run) -> int:
    s = run.scenario()
    g, grid = s.geometry(), s.build_grid()
    beams = twin.design_beams(s, g, run.cfg.seed)
    wfs = twin.design_waveforms(s, beams, grid)
    _write_waveforms(run, s, wfs, run.cfg.emit_heatmaps)
    status = EXIT_OK
    for w in wfs:
        run.say(f"{w.key}: " + (f"{len(w.waveform.bursts)} bursts, M={w.waveform.m}, dwell {w.cost_us} us"
                                if w.waveform else f"infeasible ({w.infeasible['binding']})"))
    for r in sorted({w.required_range_m for w in wfs}):
        if all(w.waveform is None for w in wfs if w.required_range_m == r):
            run.warn(f"no beam has a feasible waveform for required range {r:g} m")
            status = EXIT_INFEASIBLE
    return status


def cmd_scan(run: _Run) -> int:
    if run.cfg.instance_path is not None:
        try:
            text = Path(run.cfg.instance_path).read_text()
        except OSError as e:
            raise ScenarioError(f"cannot read instance file {run.cfg.instance_path}: {e.strerror or e}") from e
        inst = parse_instance(text)
        gap_us = run.cfg.gap_us or 0
        node_cap = run.cfg.node_cap or 100_000
    else:
        s = run.scenario()
        g, grid = s.geometry(), s.build_grid()
        beams = twin.design_beams(s, g, run.cfg.seed)
        wfs = twin.design_waveforms(s, beams, grid)
        cands = twin.generate_candidates(beams, wfs, twin.steering_lattice(grid, beams, s.solver.lattice_stride))
        if not cands:
            run.warn("no dwell candidates: every waveform regime is infeasible")
            return EXIT_INFEASIBLE
        inst = build_cover_instance(grid, cands)
        gap_us, node_cap = s.solver.gap_us, s.solver.node_cap
    run.path("instance.txt").write_text(format_instance(inst))
    if not inst.feasible:
        io.write_json(run.path("error.json"), {"stage": "cover", "constraint": "coverage",
                                               "uncovered": list(inst.uncovered)})
        run.warn(f"instance infeasible; uncovered cells: {list(inst.uncovered)}")
        return EXIT_INFEASIBLE
    lp = lp_relaxation(inst)
    pattern = branch_and_bound(inst, gap_us / 1e6, node_cap)
    run.path("pattern.txt").write_text(format_pattern(pattern, lp.objective_us))
    run.say(f"pattern: {len(pattern.selected)} dwells, cost {pattern.total_cost_s:.6f} s, {pattern.status}, "
            f"LP bound {lp.objective:.6f} s, {pattern.nodes} nodes")
    return EXIT_OK


def cmd_pipeline(run: _Run) -> int:
    s = run.scenario()
    try:
        d = twin.run_pipeline(s, run.cfg.seed)
    except PipelineError as e:
        _write_pipeline_error(run, e)
        run.warn(str(e))
        return EXIT_INFEASIBLE
    _write_design(run, d, s)
    for b in d.beams:
        _write_beam(run, d.geometry, b, heatmap=run.cfg.emit_heatmaps)
    _write_waveforms(run, s, d.waveforms, run.cfg.emit_heatmaps)
    run.say(f"frame time {d.budget.frame_time_s:.6f} s ({d.pattern.status}), {len(d.pattern.selected)} dwells, "
            f"occupancy {d.budget.occupancy:.4f}")
    if not d.budget.per_cell_revisit_ok:
        run.warn("frame time exceeds the available revisit budget")
    return EXIT_OK


def cmd_whatif(run: _Run) -> int:
    s = run.scenario()
    times = sorted({e.time_s for e in s.events})
    if not times:
        raise ScenarioError("no events: the scenario lists no failure or threat_override")
    try:
        prev = twin.run_pipeline(s, run.cfg.seed)
    except PipelineError as e:
        _write_pipeline_error(run, e)
        run.warn(f"nominal design failed: {e}")
        return EXIT_INFEASIBLE
    _write_design(run, prev, s, prefix="nominal_")
    rows, status = [], EXIT_OK
    for k, t in enumerate(times):
        new, delta = twin.reconfigure(prev, s, t, run.cfg.seed)
        io.write_json(run.path(f"delta_{k}.json"), delta.to_dict())
        run.path(f"delta_{k}.txt").write_text(delta.text())
        rows.append((k, t, delta.cause, delta.feasible, delta.stage, delta.binding_constraint,
                     delta.old_frame_time_s, delta.new_frame_time_s if delta.feasible else "",
                     delta.cells_lost, delta.cells_gained, len(delta.candidates_added),
                     len(delta.candidates_removed)))
        if not run.cfg.quiet:
            sys.stdout.write(delta.text())
        if new is None:
            status = EXIT_INFEASIBLE
        else:
            _write_design(run, new, s, prefix=f"t{k}_")
            prev = new
    io.write_csv(run.path("deltas.csv"),
                 ["event", "time_s", "cause", "feasible", "stage", "binding_constraint", "old_frame_time_s",
                  "new_frame_time_s", "cells_lost", "cells_gained", "dwells_added", "dwells_removed"], rows)
    return status


COMMANDS = {"beam": cmd_beam, "wave": cmd_wave, "scan": cmd_scan, "pipeline": cmd_pipeline, "whatif": cmd_whatif}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radopt", description="Radar search-mode design toolkit.")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    helps = {"beam": "synthesize the catalog beams", "wave": "optimize waveforms per regime",
             "scan": "solve the scan-pattern set cover", "pipeline": "full mode design",
             "whatif": "re-plan after each scripted event"}
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--scenario", type=Path, help="scenario JSON file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=0, help="64-bit master seed (default: 0)")
        p.add_argument("--gap-us", type=int, help="absolute optimality gap in microseconds")
        p.add_argument("--node-cap", type=int, help="branch-and-bound node cap")
        p.add_argument("--evals-per-dim", type=float, help="CMA-ES evaluation budget per parameter")
        p.add_argument("--emit-heatmaps", action="store_true", help="write PGM heatmaps")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        if name == "scan":
            p.add_argument("--instance", type=Path, help="solve a set-cover instance file instead")
    return ap


def parse_config(argv=None) -> RunConfig:
    a = build_parser().parse_args(argv)
    if not 0 <= a.seed < 2 ** 64:
        raise ScenarioError("--seed must be a 64-bit unsigned integer")
    for flag, val in (("--gap-us", a.gap_us), ("--node-cap", a.node_cap)):
        if val is not None and val < 0:
            raise ScenarioError(f"{flag} must be non-negative")
    return RunConfig(a.subcommand, a.scenario, a.out, a.seed, a.gap_us, a.node_cap, a.evals_per_dim,
                     a.emit_heatmaps, a.quiet, getattr(a, "instance", None))


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as e:  # argparse usage errors
        return EXIT_CONFIG if e.code else EXIT_OK
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    run = _Run(cfg)
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[cfg.subcommand](run)
    except (ScenarioError, DomainError, InstanceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as e:
        print(f"error: synthesis diverged: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RadOptError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
