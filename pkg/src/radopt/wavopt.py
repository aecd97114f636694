"""Pulse-Doppler waveform model and minimum-dwell waveform selection.

A waveform is a list of bursts, each coherently integrated, combined across
bursts by an M-of-N binary rule. Range blind zones come from eclipsing,
velocity blind zones from Doppler folding onto a zero-Doppler clutter notch.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, WaveformInfeasibleError

C = 299_792_458.0
BOLTZMANN = 1.380649e-23
T0 = 290.0
DEFAULT_RANGE_SAMPLES = 512
DEFAULT_VELOCITY_SAMPLES = 101
MAX_BURSTS = 4

_FOLD_TOL = 1e-9


@dataclass(frozen=True)
class Burst:
    pri_s: float
    pulse_width_s: float
    n_pulses: int
    carrier_hz: float = 3e9

    def __post_init__(self):
        if not (0 < self.pulse_width_s < self.pri_s):
            raise DomainError("need 0 < pulse_width < pri")
        if self.n_pulses < 1 or self.carrier_hz <= 0:
            raise DomainError("need n_pulses >= 1 and carrier > 0")

    @property
    def prf_hz(self) -> float:
        return 1.0 / self.pri_s

    @property
    def duration_s(self) -> float:
        return self.n_pulses * self.pri_s

    @property
    def duration_ns(self) -> int:
        return round(self.n_pulses * self.pri_s * 1e9)


@dataclass(frozen=True)
class Waveform:
    bursts: tuple
    m_of_n: tuple

    def __post_init__(self):
        object.__setattr__(self, "bursts", tuple(self.bursts))
        m, n = self.m_of_n
        if n != len(self.bursts) or not (1 <= m <= n):
            raise DomainError(f"invalid M-of-N ({m}, {n}) for {len(self.bursts)} bursts")

    @property
    def m(self) -> int:
        return self.m_of_n[0]

    def to_dict(self) -> dict:
        return {"bursts": [[b.pri_s, b.pulse_width_s, b.n_pulses, b.carrier_hz] for b in self.bursts],
                "m_of_n": list(self.m_of_n)}

    @classmethod
    def from_dict(cls, d) -> "Waveform":
        return cls(tuple(Burst(*b) for b in d["bursts"]), tuple(d["m_of_n"]))


@dataclass(frozen=True)
class RadarParams:
    """Radar-equation constants. Bandwidth is matched to the pulse (B = 1/pw)."""

    peak_power_w: float = 10e3
    system_losses_db: float = 6.0
    noise_figure_db: float = 5.0
    target_rcs_m2: float = 1.0
    pfa: float = 1e-6
    fluctuation: str = "swerling1"

    def __post_init__(self):
        if self.peak_power_w <= 0 or self.target_rcs_m2 <= 0:
            raise DomainError("power and RCS must be positive")
        if self.system_losses_db < 0 or self.noise_figure_db < 0:
            raise DomainError("losses and noise figure are given as non-negative dB")
        if not (0 < self.pfa < 1):
            raise DomainError("pfa must lie in (0, 1)")
        if self.fluctuation not in ("steady", "swerling1"):
            raise DomainError(f"unknown fluctuation model {self.fluctuation!r}")


@dataclass
class VisibilityMap:
    range_axis_m: np.ndarray
    velocity_axis_mps: np.ndarray
    visible: np.ndarray  # (n_range, n_velocity) burst counts
    m: int = 1

    @property
    def clear(self) -> np.ndarray:
        return self.visible >= self.m

    @property
    def clear_fraction(self) -> float:
        return float(self.clear.mean())


def _fold(x, period):
    r = np.mod(x, period)
    # snap values that sit a rounding error below the period back to zero
    return np.where(period - r <= _FOLD_TOL * period, 0.0, r)


def blind_range(b: Burst, range_m) -> np.ndarray | bool:
    tau = _fold(2.0 * np.asarray(range_m, float) / C, b.pri_s)
    out = tau < b.pulse_width_s
    return bool(out) if out.ndim == 0 else out


def blind_velocity(b: Burst, velocity_mps, notch_width_hz: float) -> np.ndarray | bool:
    if notch_width_hz < 0:
        raise DomainError("notch width must be >= 0")
    prf = b.prf_hz
    fd = _fold(2.0 * np.asarray(velocity_mps, float) * b.carrier_hz / C, prf)
    half = 0.5 * notch_width_hz
    out = (fd <= half) | (fd >= prf - half)
    return bool(out) if out.ndim == 0 else out


def burst_visibility(b: Burst, ranges, velocities, notch_width_hz) -> np.ndarray:
    """Boolean (range, velocity) mask where ``b`` is unblinded."""
    r_ok = ~np.atleast_1d(blind_range(b, ranges))
    v_ok = ~np.atleast_1d(blind_velocity(b, velocities, notch_width_hz))
    return r_ok[:, None] & v_ok[None, :]


def visibility_map(w: Waveform, ranges, velocities, notch_width_hz: float) -> VisibilityMap:
    ranges = np.asarray(ranges, float)
    velocities = np.asarray(velocities, float)
    visible = np.zeros((ranges.size, velocities.size), dtype=int)
    for b in w.bursts:
        visible += burst_visibility(b, ranges, velocities, notch_width_hz)
    return VisibilityMap(ranges, velocities, visible, w.m)


def snr_single_burst(p: RadarParams, b: Burst, range_m, beam_gain_dbi: float):
    """Coherently integrated SNR (dB) of one burst at ``range_m``.

    SNR = P G^2 lambda^2 sigma n tau / ((4 pi)^3 R^4 k T0 F L)
    """
    range_m = np.asarray(range_m, float)
    lam = C / b.carrier_hz
    g = 10.0 ** (beam_gain_dbi / 10.0)
    f = 10.0 ** (p.noise_figure_db / 10.0)
    loss = 10.0 ** (p.system_losses_db / 10.0)
    num = p.peak_power_w * g * g * lam * lam * p.target_rcs_m2 * b.n_pulses * b.pulse_width_s
    den = (4.0 * math.pi) ** 3 * range_m ** 4 * BOLTZMANN * T0 * f * loss
    out = 10.0 * np.log10(num / den)
    return float(out) if out.ndim == 0 else out


def pd_single_burst(snr_db, pfa: float, fluctuation: str = "swerling1"):
    """Single-burst detection probability for a square-law detector.

    ``steady``: Pd = Q1(sqrt(2 snr), sqrt(-2 ln pfa)) (Marcum Q).
    ``swerling1``: Pd = pfa ** (1 / (1 + snr)).
    """
    if not (0 < pfa < 1):
        raise DomainError("pfa must lie in (0, 1)")
    snr = 10.0 ** (np.asarray(snr_db, float) / 10.0)
    if fluctuation == "swerling1":
        out = np.power(pfa, 1.0 / (1.0 + snr))
    elif fluctuation == "steady":
        # Q1(a, b) is the survival function of a noncentral chi-square, 2 dof
        # scipy returns NaN for huge noncentrality; Pd is 1.0 in double there
        big = snr > 1e4
        out = stats.ncx2.sf(-2.0 * math.log(pfa), 2, 2.0 * np.where(big, 0.0, snr))
        out = np.where(big, 1.0, np.where(snr == 0, pfa, out))
    else:
        raise DomainError(f"unknown fluctuation model {fluctuation!r}")
    return float(out) if np.ndim(out) == 0 else out


def pd_binary(pds: Sequence[float], m: int) -> float:
    """P(at least m of the independent detections fire), Poisson-binomial tail."""
    pds = [float(p) for p in pds]
    if not (1 <= m <= len(pds)):
        raise DomainError(f"need 1 <= M <= {len(pds)}")
    if any(not (0.0 <= p <= 1.0) for p in pds):
        raise DomainError("probabilities must lie in [0, 1]")
    dist = np.zeros(len(pds) + 1)
    dist[0] = 1.0
    for k, p in enumerate(pds, start=1):
        dist[1:k + 1] = dist[1:k + 1] * (1 - p) + dist[:k] * p
        dist[0] *= 1 - p
    return float(min(1.0, dist[m:].sum()))


def dwell_time(w: Waveform) -> float:
    return sum(b.n_pulses * b.pri_s for b in w.bursts)


def dwell_time_us(w: Waveform) -> int:
    """Dwell time rounded to integer microseconds (scan-pattern cost unit)."""
    return round(sum(b.duration_ns for b in w.bursts) / 1000)


@dataclass(frozen=True)
class WaveformRequirement:
    required_range_m: float
    velocity_span: tuple = (-300.0, 300.0)
    min_pd: float = 0.9
    clear_fraction: float = 0.9
    notch_width_hz: float = 200.0
    min_m: int = 1
    n_range: int = DEFAULT_RANGE_SAMPLES
    n_velocity: int = DEFAULT_VELOCITY_SAMPLES

    def __post_init__(self):
        if self.required_range_m <= 0:
            raise DomainError("required range must be positive")
        if not (0 <= self.min_pd <= 1 and 0 <= self.clear_fraction <= 1):
            raise DomainError("min_pd and clear_fraction are fractions")
        if self.min_m < 1:
            raise DomainError("min_m must be >= 1")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Sample axes: ranges in (0, R], velocities over the span, inclusive."""
        r = np.linspace(0.0, self.required_range_m, self.n_range + 1)[1:]
        v = np.linspace(self.velocity_span[0], self.velocity_span[1], self.n_velocity)
        return r, v


@dataclass
class InfeasibilityReport:
    binding: str  # "detection", "clear_fraction" or "joint"
    best_pd: float
    best_clear_fraction: float
    requirement: WaveformRequirement
    candidates_checked: int

    _NAMES = {
        "detection": "(b) detection: pd_binary at required range >= min_pd",
        "clear_fraction": "(a) visibility: clear fraction >= clear_fraction",
        "joint": "(a)+(b) jointly: each is met by some waveform, never both",
    }

    def text(self) -> str:
        r = self.requirement
        return (f"no feasible waveform; binding constraint {self._NAMES[self.binding]}\n"
                f"  required_range_m = {r.required_range_m}\n"
                f"  min_pd = {r.min_pd}, best achievable = {self.best_pd:.6f}\n"
                f"  clear_fraction = {r.clear_fraction}, best achievable = {self.best_clear_fraction:.6f}\n"
                f"  candidates checked = {self.candidates_checked}")

    def to_dict(self) -> dict:
        return {"binding": self.binding, "best_pd": self.best_pd,
                "best_clear_fraction": self.best_clear_fraction,
                "required_range_m": self.requirement.required_range_m,
                "min_pd": self.requirement.min_pd,
                "clear_fraction": self.requirement.clear_fraction}


class WaveformEvaluator:
    """Feasibility predicate for catalog subsets, with per-burst caching."""

    def __init__(self, p: RadarParams, req: WaveformRequirement, catalog: Sequence[Burst], beam_gain_dbi: float):
        self.p, self.req, self.catalog = p, req, tuple(catalog)
        self.gain = beam_gain_dbi
        ranges, vels = req.axes()
        self._vis = [burst_visibility(b, ranges, vels, req.notch_width_hz).astype(np.int16) for b in self.catalog]
        self._pd = [pd_single_burst(snr_single_burst(p, b, req.required_range_m, beam_gain_dbi),
                                    p.pfa, p.fluctuation) for b in self.catalog]

    def m_for(self, n: int) -> int | None:
        return self.req.min_m if self.req.min_m <= n else None

    def measures(self, subset: Sequence[int]) -> tuple[float, float]:
        """(clear fraction, binary Pd) of the subset at its M."""
        m = self.m_for(len(subset))
        if m is None:
            return 0.0, 0.0
        vis = sum(self._vis[i] for i in subset)
        return float((vis >= m).mean()), pd_binary([self._pd[i] for i in subset], m)

    def feasible(self, subset: Sequence[int]) -> bool:
        clear, pd = self.measures(subset)
        return clear >= self.req.clear_fraction and pd >= self.req.min_pd

    def cost_ns(self, subset: Sequence[int]) -> int:
        return sum(self.catalog[i].duration_ns for i in subset)

    def waveform(self, subset: Sequence[int]) -> Waveform:
        return Waveform(tuple(self.catalog[i] for i in subset), (self.m_for(len(subset)), len(subset)))


def _key(ev: WaveformEvaluator, subset):
    return ev.cost_ns(subset), len(subset), tuple(subset)


def optimize_waveform(p: RadarParams, req: WaveformRequirement, catalog: Sequence[Burst],
                      beam_gain_dbi: float, max_bursts: int = MAX_BURSTS) -> Waveform:
    """Minimum-dwell feasible waveform over catalog subsets of size <= max_bursts.

    Depth-first enumeration in lexicographic catalog order. A node is
    pruned once its dwell reaches the incumbent's; a feasible node is not
    extended, since both constraints are monotone under adding bursts (at
    fixed M) and extensions only cost more. Ties go to fewer bursts, then
    to the lexicographically smaller index tuple.

    Raises ``WaveformInfeasibleError`` with a report naming the binding
    constraint when nothing is feasible.
    """
    if not catalog:
        raise DomainError("waveform catalog is empty")
    ev = WaveformEvaluator(p, req, catalog, beam_gain_dbi)
    n = len(ev.catalog)
    best = None
    stats_ = {"pd": 0.0, "clear": 0.0, "any_pd": False, "any_clear": False, "checked": 0}

    def visit(subset):
        nonlocal best
        cost = ev.cost_ns(subset)
        if best is not None and cost > best[0]:
            return
        clear, pd = ev.measures(subset)
        stats_["checked"] += 1
        stats_["pd"] = max(stats_["pd"], pd)
        stats_["clear"] = max(stats_["clear"], clear)
        pd_ok, clear_ok = pd >= req.min_pd, clear >= req.clear_fraction
        stats_["any_pd"] |= pd_ok
        stats_["any_clear"] |= clear_ok
        if pd_ok and clear_ok:
            key = _key(ev, subset)
            if best is None or key < best:
                best = key
            return
        if best is not None and cost >= best[0]:
            return
        if len(subset) < max_bursts:
            for j in range(subset[-1] + 1, n):
                visit(subset + (j,))

    for i in range(n):
        visit((i,))

    if best is None:
        if not stats_["any_pd"]:
            binding = "detection"
        elif not stats_["any_clear"]:
            binding = "clear_fraction"
        else:
            binding = "joint"
        raise WaveformInfeasibleError(InfeasibilityReport(binding, stats_["pd"], stats_["clear"], req, stats_["checked"]))
    return ev.waveform(best[2])


def enumerate_waveforms(p: RadarParams, req: WaveformRequirement, catalog: Sequence[Burst],
                        beam_gain_dbi: float, max_bursts: int = MAX_BURSTS) -> Waveform | None:
    """Brute-force reference: every subset up to ``max_bursts``, no pruning."""
    ev = WaveformEvaluator(p, req, catalog, beam_gain_dbi)
    best = None
    for k in range(1, max_bursts + 1):
        for subset in itertools.combinations(range(len(ev.catalog)), k):
            if ev.feasible(subset):
                key = _key(ev, subset)
                if best is None or key < best:
                    best = key
    return None if best is None else ev.waveform(best[2])


def detection_range(p: RadarParams, w: Waveform, beam_gain_dbi: float, min_pd: float,
                    r_max: float = 1e7, rel_tol: float = 1e-12) -> float:
    """Largest range at which ``pd_binary`` still reaches ``min_pd``.

    Bisection on the monotone Pd(R); the returned range is the lower bracket,
    so Pd there is guaranteed >= min_pd. Returns 0 if even 1 m fails.
    """
    def pd_at(r):
        pds = [pd_single_burst(snr_single_burst(p, b, r, beam_gain_dbi), p.pfa, p.fluctuation) for b in w.bursts]
        return pd_binary(pds, w.m)

    lo, hi = 1.0, r_max
    if pd_at(lo) < min_pd:
        return 0.0
    if pd_at(hi) >= min_pd:
        return hi
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if pd_at(mid) >= min_pd:
            lo = mid
        else:
            hi = mid
    return lo
