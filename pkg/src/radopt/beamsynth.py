"""Beam synthesis: fit element excitations to a beam-shape template."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array import (ArrayGeometry, BeamTemplate, ExcitationVector, Raster, Rect,
                    steering_phase, TemplateEvaluator)
from .cmaes import CmaConfig, OptResult, cmaes_minimize
from .errors import DegeneratePatternError, DomainError
from .geom import Direction

INITIAL_AMPLITUDE = 0.5


@dataclass(frozen=True)
class SynthesisProblem:
    """Decision-vector <-> excitation mapping for one array and template.

    The decision vector holds one amplitude per alive element followed by
    one phase per alive element (phase-only mode: phases only, amplitudes
    fixed). Amplitudes live in [0, 1]; phases are unbounded and wrapped.
    """

    geometry: ArrayGeometry
    template: BeamTemplate
    steering: Direction
    raster: Raster
    phase_only: bool = False

    @property
    def alive_index(self) -> np.ndarray:
        return np.flatnonzero(self.geometry.alive_mask)

    @property
    def dim(self) -> int:
        n = self.geometry.n_alive
        return n if self.phase_only else 2 * n

    def bounds(self):
        n = self.geometry.n_alive
        if self.phase_only:
            return None
        lo = np.concatenate([np.zeros(n), np.full(n, -np.inf)])
        hi = np.concatenate([np.ones(n), np.full(n, np.inf)])
        return lo, hi

    def weights(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        n = self.geometry.n_alive
        if self.phase_only:
            amp, ph = np.full((len(X), n), INITIAL_AMPLITUDE), X
        else:
            amp, ph = X[:, :n], X[:, n:]
        W = np.zeros((len(X), self.geometry.n_elements), dtype=complex)
        W[:, self.alive_index] = amp * np.exp(1j * ph)
        return W

    def evaluator(self) -> TemplateEvaluator:
        return TemplateEvaluator(self.geometry, self.raster, self.template, self.steering)

    def initial_point(self, warm: ExcitationVector | None = None) -> np.ndarray:
        idx = self.alive_index
        if warm is not None:
            amp = np.abs(warm.weights[idx])
            scale = amp.max(initial=0.0)
            amp = amp / scale * INITIAL_AMPLITUDE if scale > 0 else np.full(idx.size, INITIAL_AMPLITUDE)
            ph = np.angle(warm.weights[idx])
        else:
            amp = np.full(idx.size, INITIAL_AMPLITUDE)
            ph = steering_phase(self.geometry, self.steering)[idx]
        return ph.copy() if self.phase_only else np.concatenate([amp, ph])

    def excitation(self, x: np.ndarray) -> ExcitationVector:
        w = self.weights(x)[0]
        amp = np.abs(w)
        peak = amp.max(initial=0.0)
        if not peak > 0:
            raise DegeneratePatternError("all synthesized amplitudes collapsed to zero")
        phase = (np.angle(w) + math.pi) % (2 * math.pi) - math.pi
        return ExcitationVector.from_amp_phase(amp / peak, np.where(amp > 0, phase, 0.0))


def synthesize_beam(g: ArrayGeometry, t: BeamTemplate, steering: Direction, cfg: CmaConfig,
                    raster: Raster | None = None, warm_start: ExcitationVector | None = None,
                    phase_only: bool = False) -> tuple[ExcitationVector, OptResult]:
    """Run CMA-ES on (amplitude, phase) per alive element against ``t``.

    Starts from uniform amplitudes with the steering phase ramp, or from
    ``warm_start`` (dead elements dropped). The returned excitation is
    rescaled so its largest amplitude is 1; the pattern is unchanged.
    """
    if g.n_alive == 0:
        raise DegeneratePatternError("array has no alive element")
    prob = SynthesisProblem(g, t, steering, raster if raster is not None else Raster.default(), phase_only)
    x0 = prob.initial_point(warm_start)
    evaluate = prob.evaluator()
    res = cmaes_minimize(lambda X: evaluate(prob.weights(X)), x0, cfg,
                         bounds=prob.bounds(), vectorized=True)
    return prob.excitation(res.best_point), res


def widen_template(pencil: BeamTemplate, factor_u: float, factor_v: float) -> BeamTemplate:
    """Scale the mainlobe region about its center; push sidelobe regions outward.

    Along each axis, a sidelobe region lying entirely on one side of the
    mainlobe is translated by the mainlobe's growth on that side; a region
    straddling the mainlobe is stretched by the growth on both sides.
    """
    if factor_u < 1 or factor_v < 1:
        raise DomainError("widening factors must be >= 1")
    ml = pencil.mainlobe
    cu, cv = ml.center
    hu, hv = 0.5 * (ml.u_hi - ml.u_lo), 0.5 * (ml.v_hi - ml.v_lo)
    grow_u, grow_v = (factor_u - 1) * hu, (factor_v - 1) * hv
    new_ml = Rect(cu - factor_u * hu, cu + factor_u * hu, cv - factor_v * hv, cv + factor_v * hv)
    for uu in (new_ml.u_lo, new_ml.u_hi):
        for vv in (new_ml.v_lo, new_ml.v_hi):
            if uu * uu + vv * vv > 1.0:
                raise DomainError("widened mainlobe leaves the unit disk")
    mask = []
    for r, db in pencil.sidelobe_mask:
        u_lo, u_hi = _move(r.u_lo, r.u_hi, ml.u_lo, ml.u_hi, grow_u)
        v_lo, v_hi = _move(r.v_lo, r.v_hi, ml.v_lo, ml.v_hi, grow_v)
        mask.append((Rect(u_lo, u_hi, v_lo, v_hi), db))
    return BeamTemplate(new_ml, pencil.min_gain_db, tuple(mask))


def _move(lo, hi, ml_lo, ml_hi, grow):
    if lo >= ml_hi:
        return lo + grow, hi + grow
    if hi <= ml_lo:
        return lo - grow, hi - grow
    return lo - grow, hi + grow
