"""Independent reference implementations used as test oracles.

None of these import the code under test; each follows a different
computational route than the library (closed forms, quadrature,
exhaustive enumeration, simulation, or a third-party solver).
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate, special


def dirichlet_af(n: int, d: float, u):
    """|sin(n pi d u) / sin(pi d u)| for a uniform n-element linear array."""
    u = np.asarray(u, float)
    num = np.sin(n * np.pi * d * u)
    den = np.sin(np.pi * d * u)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.abs(num / den)
    return np.where(np.abs(den) < 1e-15, float(n), out)


def dirichlet_first_sidelobe_db(n: int, d: float = 0.5, samples: int = 200001) -> float:
    """First sidelobe of the Dirichlet kernel by dense sampling between the
    first and second nulls."""
    u = np.linspace(1.0 / (n * d), 2.0 / (n * d), samples)
    return float(20 * np.log10(dirichlet_af(n, d, u).max() / n))


def marcum_q1(a: float, b: float) -> float:
    """Q1(a, b) by quadrature of the Rician density over [b, inf)."""
    if a == 0:
        return math.exp(-b * b / 2)
    f = lambda x: x * math.exp(-0.5 * (x - a) ** 2) * special.i0e(a * x)
    val, _ = integrate.quad(f, b, max(b, a) + 40.0, limit=400, epsabs=1e-14, epsrel=1e-12)
    return val


def swerling1_by_averaging(snr_lin: float, pfa: float) -> float:
    """Steady-target Pd averaged over an exponential SNR distribution."""
    b = math.sqrt(-2 * math.log(pfa))
    f = lambda s: marcum_q1(math.sqrt(2 * s), b) * math.exp(-s / snr_lin) / snr_lin
    val, _ = integrate.quad(f, 0, 60 * snr_lin, limit=400)
    return val


def pd_binary_enum(pds, m: int) -> float:
    """P(at least m successes) by summing over all 2^n outcomes."""
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=len(pds)):
        if sum(outcome) >= m:
            total += math.prod(p if o else 1 - p for p, o in zip(pds, outcome))
    return total


def pd_binary_monte_carlo(pds, m: int, trials: int, rng: np.random.Generator) -> float:
    hits = rng.random((trials, len(pds))) < np.asarray(pds)
    return float((hits.sum(axis=1) >= m).mean())


def cover_optimum(n_cells: int, sets, costs) -> int | None:
    """Minimum total cost over all subsets whose union is the universe."""
    universe = set(range(n_cells))
    best = None
    for r in range(len(sets) + 1):
        for combo in itertools.combinations(range(len(sets)), r):
            covered = set().union(*(sets[k] for k in combo)) if combo else set()
            if covered >= universe:
                c = sum(costs[k] for k in combo)
                if best is None or c < best:
                    best = c
    return best


def cover_lp_scipy(n_cells: int, sets, costs) -> float:
    from scipy.optimize import linprog
    A = np.zeros((n_cells, len(sets)))
    for k, s in enumerate(sets):
        A[list(s), k] = 1
    res = linprog(costs, A_ub=-A, b_ub=-np.ones(n_cells), bounds=[(0, 1)] * len(sets), method="highs")
    assert res.status == 0
    return float(res.fun)


def harmonic(n: int) -> float:
    return sum(1.0 / k for k in range(1, n + 1))


def radar_snr_db(p_w, g_dbi, f_hz, rcs, pw_s, n, nf_db, loss_db, r_m) -> float:
    """Radar equation written out term by term in dB."""
    c, k, t0 = 299792458.0, 1.380649e-23, 290.0
    lam_db = 20 * math.log10(c / f_hz)
    return (10 * math.log10(p_w) + 2 * g_dbi + lam_db + 10 * math.log10(rcs) + 10 * math.log10(n * pw_s)
            - 30 * math.log10(4 * math.pi) - 40 * math.log10(r_m) - 10 * math.log10(k * t0) - nf_db - loss_db)


def random_cover_sets(rng: np.random.Generator, max_side: int = 4, max_cand: int = 12):
    """Random feasible set-cover data on a grid of at most max_side^2 cells:
    (n_cells, sets, costs_us), with every cell in at least one set."""
    nu, nv = rng.integers(1, max_side + 1, 2)
    n_cells = int(nu * nv)
    n_cand = int(rng.integers(1, max_cand + 1))
    sets = []
    for _ in range(n_cand):
        # rectangular footprints, like dwells on a grid
        w, h = rng.integers(1, nu + 1), rng.integers(1, nv + 1)
        i0, j0 = rng.integers(0, nu - w + 1), rng.integers(0, nv - h + 1)
        sets.append({int(j * nu + i) for i in range(i0, i0 + w) for j in range(j0, j0 + h)})
    for c in range(n_cells):
        if not any(c in s for s in sets):
            sets[int(rng.integers(n_cand))].add(c)
    costs = [int(x) for x in rng.integers(1, 3_000_000, n_cand)]
    return n_cells, sets, costs


def waveform_min_cost_enum(evaluator, max_bursts: int):
    """Cheapest feasible subset cost (ns) by exhaustive enumeration; shares
    only ``evaluator.feasible`` with the optimizer under test."""
    best = None
    for k in range(1, max_bursts + 1):
        for sub in itertools.combinations(range(len(evaluator.catalog)), k):
            if evaluator.feasible(sub):
                cost = sum(evaluator.catalog[i].duration_ns for i in sub)
                if best is None or cost < best:
                    best = cost
    return best
