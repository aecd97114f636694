"""Scan-pattern selection as weighted set cover over the steering grid.

Costs are held in integer microseconds so incumbent comparisons and pattern
totals are exact.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasibleCoverError, InstanceError
from .geom import Direction, SteeringGrid
from .simplex import solve_covering_lp

INTEGRAL_TOL = 1e-9


def seconds_to_us(s: float) -> int:
    return int(round(float(s) * 1e6))


@dataclass(frozen=True)
class DwellCandidate:
    id: int
    steering: Direction
    beamwidth_u: float
    beamwidth_v: float
    waveform_ref: str
    cost_s: float
    detection_range_m: float
    beam_ref: str = ""

    def __post_init__(self):
        if not self.cost_s > 0:
            raise InstanceError("dwell cost must be positive")
        if self.beamwidth_u <= 0 or self.beamwidth_v <= 0:
            raise InstanceError("dwell footprint must have positive extent")

    @property
    def footprint(self) -> tuple[float, float, float, float]:
        hu, hv = 0.5 * self.beamwidth_u, 0.5 * self.beamwidth_v
        s = self.steering
        return s.u - hu, s.u + hu, s.v - hv, s.v + hv

    @property
    def cost_us(self) -> int:
        return seconds_to_us(self.cost_s)


@dataclass(frozen=True)
class CoverInstance:
    n_cells: int
    ids: tuple            # candidate ids, one per column
    covers: tuple         # frozenset of cell ids per candidate
    costs_us: tuple       # integer microseconds per candidate
    candidates: tuple = ()
    uncovered: tuple = ()

    def __post_init__(self):
        if not (len(self.ids) == len(self.covers) == len(self.costs_us)):
            raise InstanceError("ids, covers and costs must align")
        if len(set(self.ids)) != len(self.ids):
            raise InstanceError("candidate ids must be unique")
        for s in self.covers:
            if any(not (0 <= j < self.n_cells) for j in s):
                raise InstanceError("covered cell id out of range")
        if any(c <= 0 for c in self.costs_us):
            raise InstanceError("candidate costs must be positive")

    @classmethod
    def from_sets(cls, n_cells: int, sets: Sequence[Iterable[int]], costs_s: Sequence[float],
                  ids: Sequence[int] | None = None) -> "CoverInstance":
        covers = tuple(frozenset(int(j) for j in s) for s in sets)
        ids = tuple(range(len(covers))) if ids is None else tuple(ids)
        costs = tuple(seconds_to_us(c) for c in costs_s)
        union = frozenset().union(*covers) if covers else frozenset()
        missing = tuple(j for j in range(n_cells) if j not in union)
        return cls(n_cells, ids, covers, costs, (), missing)

    @property
    def n_candidates(self) -> int:
        return len(self.ids)

    @property
    def feasible(self) -> bool:
        return not self.uncovered

    def index_of(self, cand_id: int) -> int:
        return self.ids.index(cand_id)

    def incidence(self) -> np.ndarray:
        A = np.zeros((self.n_cells, self.n_candidates))
        for k, s in enumerate(self.covers):
            A[list(s), k] = 1.0
        return A

    def require_feasible(self):
        if self.uncovered:
            raise InfeasibleCoverError(self.uncovered)


@dataclass(frozen=True)
class ScanPattern:
    selected: tuple       # sorted candidate ids
    total_cost_us: int
    optimality: str       # "exact" | "greedy" | "bounded"
    gap_us: int = 0
    lower_bound_us: float = 0.0
    nodes: int = 0

    @property
    def total_cost_s(self) -> float:
        return self.total_cost_us / 1e6

    @property
    def status(self) -> str:
        return f"bounded({self.gap_us / 1e6:.6f})" if self.optimality == "bounded" else self.optimality


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float       # seconds
    status: str            # "optimal" | "infeasible"
    objective_us: float = 0.0


def footprint_contains_cell(cand: DwellCandidate, cell) -> bool:
    """Closed containment of the cell rectangle in the dwell footprint."""
    fu0, fu1, fv0, fv1 = cand.footprint
    cu0, cu1, cv0, cv1 = cell.bounds
    tol = 1e-12
    return fu0 <= cu0 + tol and cu1 <= fu1 + tol and fv0 <= cv0 + tol and cv1 <= fv1 + tol


def build_cover_instance(grid: SteeringGrid, dwells: Sequence[DwellCandidate]) -> CoverInstance:
    """Cell j is in covers(i) iff i's footprint contains j's rectangle and
    i's detection range reaches j's required range. Empty candidates are
    dropped; uncovered cells are recorded on the (infeasible) instance."""
    if not dwells:
        raise InstanceError("no dwell candidates")
    cb = np.array([c.bounds for c in grid.cells])          # (n_cells, 4)
    req = np.array([c.required_range_m for c in grid.cells])
    ids = np.array([c.id for c in grid.cells])
    tol = 1e-12
    kept, covers = [], []
    for d in dwells:
        fu0, fu1, fv0, fv1 = d.footprint
        ok = ((fu0 <= cb[:, 0] + tol) & (cb[:, 1] <= fu1 + tol) & (fv0 <= cb[:, 2] + tol)
              & (cb[:, 3] <= fv1 + tol) & (d.detection_range_m >= req))
        if ok.any():
            kept.append(d)
            covers.append(frozenset(int(j) for j in ids[ok]))
    union = frozenset().union(*covers) if covers else frozenset()
    missing = tuple(c.id for c in grid.cells if c.id not in union)
    return CoverInstance(len(grid.cells), tuple(d.id for d in kept), tuple(covers),
                         tuple(d.cost_us for d in kept), tuple(kept), missing)


def _pattern(inst: CoverInstance, cols: Iterable[int], optimality: str, **kw) -> ScanPattern:
    cols = sorted(cols)
    return ScanPattern(tuple(sorted(inst.ids[k] for k in cols)),
                       sum(inst.costs_us[k] for k in cols), optimality, **kw)


def greedy_cover(inst: CoverInstance) -> ScanPattern:
    """Pick the candidate with the least cost per newly covered cell until
    every cell is covered; ratio ties go to the lower candidate id."""
    inst.require_feasible()
    uncovered = set(range(inst.n_cells))
    chosen = []
    order = sorted(range(inst.n_candidates), key=lambda k: inst.ids[k])
    while uncovered:
        best = None
        for k in order:
            new = len(inst.covers[k] & uncovered)
            if new == 0:
                continue
            # exact ratio comparison: cost_k / new_k < cost_b / new_b
            if best is None or inst.costs_us[k] * best[1] < inst.costs_us[best[0]] * new:
                best = (k, new)
        chosen.append(best[0])
        uncovered -= inst.covers[best[0]]
    return _pattern(inst, chosen, "greedy")


def _node_lp(inst: CoverInstance, fixed_in: frozenset, fixed_out: frozenset):
    """LP bound of a node: fixed-in cost plus the relaxation on what is left.

    Returns (bound_us, x_full) or (inf, None) when the node is infeasible.
    """
    covered = set()
    for k in fixed_in:
        covered |= inst.covers[k]
    rows = [j for j in range(inst.n_cells) if j not in covered]
    free = [k for k in range(inst.n_candidates) if k not in fixed_in and k not in fixed_out]
    base = float(sum(inst.costs_us[k] for k in fixed_in))
    x_full = np.zeros(inst.n_candidates)
    for k in fixed_in:
        x_full[k] = 1.0
    if not rows:
        return base, x_full
    row_pos = {j: i for i, j in enumerate(rows)}
    A = np.zeros((len(rows), len(free)))
    for c, k in enumerate(free):
        for j in inst.covers[k]:
            if j in row_pos:
                A[row_pos[j], c] = 1.0
    if np.any(A.sum(axis=1) == 0):
        return math.inf, None
    x, obj = solve_covering_lp([inst.costs_us[k] for k in free], A)
    if x is None:
        return math.inf, None
    x_full[free] = x
    return base + obj, x_full


def lp_relaxation(inst: CoverInstance) -> LpSolution:
    """min c^T x s.t. A x >= 1, 0 <= x <= 1 (objective in seconds)."""
    inst.require_feasible()
    bound_us, x = _node_lp(inst, frozenset(), frozenset())
    if x is None:
        return LpSolution(np.zeros(inst.n_candidates), math.inf, "infeasible", math.inf)
    return LpSolution(x, bound_us / 1e6, "optimal", bound_us)


def _int_bound(bound_us: float) -> int:
    # integer costs: the node's best integer solution is >= ceil(LP bound)
    return math.ceil(bound_us - 1e-6)


def branch_and_bound(inst: CoverInstance, gap_abs_s: float = 0.0, node_cap: int = 100_000) -> ScanPattern:
    """Best-first branch-and-bound with LP lower bounds.

    The incumbent starts from ``greedy_cover``. Nodes are expanded in order
    of LP bound (creation order breaks ties); the branching variable is the
    most fractional one (lowest id on ties) and the include-branch is
    created first. A node is pruned when its rounded-up bound cannot beat
    the incumbent by more than ``gap_abs_s``.

    If ``node_cap`` nodes are expanded before the queue empties the
    incumbent is returned with ``bounded`` status and the remaining gap.
    """
    inst.require_feasible()
    gap_us = seconds_to_us(gap_abs_s)
    greedy = greedy_cover(inst)
    inc_cols = [inst.index_of(i) for i in greedy.selected]
    inc_cost = greedy.total_cost_us

    counter = itertools.count()
    root_bound, root_x = _node_lp(inst, frozenset(), frozenset())
    heap = [(root_bound, next(counter), frozenset(), frozenset(), root_x)]
    root_lb = root_bound
    nodes = 0
    capped = False
    order_rank = {k: inst.ids[k] for k in range(inst.n_candidates)}

    while heap:
        if _int_bound(heap[0][0]) >= inc_cost - gap_us:
            break  # every open node is within the allowed gap
        if nodes >= node_cap:
            capped = True
            break
        bound, _, fin, fout, x = heapq.heappop(heap)
        nodes += 1
        frac = [(abs(x[k] - 0.5), order_rank[k], k) for k in range(inst.n_candidates)
                if INTEGRAL_TOL < x[k] < 1 - INTEGRAL_TOL]
        if not frac:
            cols = [k for k in range(inst.n_candidates) if x[k] > 0.5]
            cost = sum(inst.costs_us[k] for k in cols)
            if cost < inc_cost:
                inc_cost, inc_cols = cost, cols
            continue
        _, _, k = min(frac)
        for child_in, child_out in ((fin | {k}, fout), (fin, fout | {k})):
            b, cx = _node_lp(inst, child_in, child_out)
            if cx is not None and _int_bound(b) < inc_cost - gap_us:
                heapq.heappush(heap, (b, next(counter), child_in, child_out, cx))

    open_lb = min((h[0] for h in heap), default=math.inf)
    lower = min(float(inc_cost), open_lb)
    remaining = max(0, inc_cost - _int_bound(lower)) if heap else 0
    if remaining == 0:
        return _pattern(inst, inc_cols, "exact", lower_bound_us=root_lb, nodes=nodes)
    return _pattern(inst, inc_cols, "bounded", gap_us=remaining, lower_bound_us=root_lb, nodes=nodes)


def verify_cover(inst: CoverInstance, pattern: ScanPattern) -> bool:
    try:
        cols = [inst.index_of(i) for i in pattern.selected]
    except ValueError:
        return False
    covered = set()
    for k in cols:
        covered |= inst.covers[k]
    return (covered == set(range(inst.n_cells))
            and sum(inst.costs_us[k] for k in cols) == pattern.total_cost_us)


def brute_force_cover(inst: CoverInstance) -> tuple[int, tuple]:
    """Exhaustive subset enumeration; (cost_us, selected ids) of an optimum."""
    n = inst.n_candidates
    full = set(range(inst.n_cells))
    best = (None, ())
    for mask in range(1 << n):
        cols = [k for k in range(n) if mask >> k & 1]
        cost = sum(inst.costs_us[k] for k in cols)
        if best[0] is not None and cost >= best[0]:
            continue
        covered = set()
        for k in cols:
            covered |= inst.covers[k]
        if covered == full:
            best = (cost, tuple(sorted(inst.ids[k] for k in cols)))
    return best


# -- plain-text instance / pattern formats ----------------------------------

def format_instance(inst: CoverInstance) -> str:
    """Plain-text instance.

    ::

        # comment lines start with '#'
        <n_cells> <n_candidates>
        <id> <cost_s> <cell> <cell> ...     (one line per candidate)

    Costs are written as exact decimal seconds (microsecond resolution).
    """
    lines = ["# weighted set cover: n_cells n_candidates, then: id cost_s covered-cell-ids",
             f"{inst.n_cells} {inst.n_candidates}"]
    for i, c, s in zip(inst.ids, inst.costs_us, inst.covers):
        lines.append(" ".join([str(i), _us_str(c)] + [str(j) for j in sorted(s)]))
    return "\n".join(lines) + "\n"


def _us_str(us: int) -> str:
    return f"{us // 1_000_000}.{us % 1_000_000:06d}"


def parse_instance(text: str) -> CoverInstance:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise InstanceError("instance header must be '<n_cells> <n_candidates>'")
    try:
        n_cells, n_cand = int(rows[0][0]), int(rows[0][1])
    except ValueError:
        raise InstanceError("instance header must be '<n_cells> <n_candidates>'") from None
    body = rows[1:]
    if len(body) != n_cand:
        raise InstanceError(f"header announces {n_cand} candidates, found {len(body)}")
    ids, costs, covers = [], [], []
    for r in body:
        try:
            if len(r) < 2:
                raise ValueError
            ids.append(int(r[0]))
            costs.append(int(Decimal(r[1]) * 1_000_000))
            covers.append(frozenset(int(j) for j in r[2:]))
        except (ValueError, ArithmeticError):
            raise InstanceError(f"malformed candidate line: {' '.join(r)}") from None
    union = frozenset().union(*covers) if covers else frozenset()
    missing = tuple(j for j in range(n_cells) if j not in union)
    return CoverInstance(n_cells, tuple(ids), tuple(covers), tuple(costs), (), missing)


def format_pattern(p: ScanPattern, lp_bound_us: float | None = None) -> str:
    lines = [f"optimality {p.optimality}",
             f"total_cost_s {_us_str(p.total_cost_us)}",
             f"gap_s {_us_str(p.gap_us)}"]
    if lp_bound_us is not None:
        lines.append(f"lp_bound_s {lp_bound_us / 1e6:.9f}")
    lines.append("selected " + " ".join(str(i) for i in p.selected))
    return "\n".join(lines) + "\n"


def parse_pattern(text: str) -> tuple[ScanPattern, float | None]:
    kv = {}
    for ln in text.splitlines():
        if ln.strip():
            key, _, rest = ln.partition(" ")
            kv[key] = rest.strip()
    sel = tuple(int(t) for t in kv.get("selected", "").split())
    p = ScanPattern(sel, int(Decimal(kv["total_cost_s"]) * 1_000_000), kv["optimality"],
                    gap_us=int(Decimal(kv.get("gap_s", "0")) * 1_000_000))
    lp = float(kv["lp_bound_s"]) * 1e6 if "lp_bound_s" in kv else None
    return p, lp
