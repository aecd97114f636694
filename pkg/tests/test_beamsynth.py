import numpy as np
import pytest

from radopt.array import (ArrayGeometry, ExcitationVector, Raster, half_power_beamwidth, pattern_on_raster,
                          pencil_template, template_cost)
from radopt.beamsynth import SynthesisProblem, synthesize_beam, widen_template
from radopt.cmaes import CmaConfig
from radopt.errors import DomainError
from radopt.geom import Direction

BORESIGHT = Direction(0.0, 0.0)


def _cut_width(g, w, axis):
    r = Raster.box(-1, 1, 0, 0, 4001, 1) if axis == "u" else Raster.box(0, 0, -1, 1, 1, 4001)
    return half_power_beamwidth(pattern_on_raster(g, w, r), axis)


def test_uniform_matching_template_costs_zero_at_start():
    g = ArrayGeometry(16, 16)
    # -13 dB ceiling past the first null (0.125), -3 dB floor inside the beam
    t = pencil_template(0.03, 0.03, -3.0, 0.15, 0.15, -13.0)
    r = Raster.default(65)
    assert template_cost(pattern_on_raster(g, ExcitationVector.uniform(g), r), t, BORESIGHT) == 0.0
    w, res = synthesize_beam(g, t, BORESIGHT, CmaConfig(sigma0=0.1, max_evals=500, target_cost=0.0, seed=0),
                             raster=r)
    assert res.history[0] == 0.0 and res.best_cost == 0.0 and res.evals_used == 1


def test_minus25_db_template_reduces_cost_tenfold():
    g = ArrayGeometry(16, 16)
    t = pencil_template(0.03, 0.03, -3.0, 0.2, 0.2, -25.0)
    d = 2 * g.n_alive
    w, res = synthesize_beam(g, t, BORESIGHT, CmaConfig(sigma0=0.2, max_evals=50 * d, seed=1))
    assert res.best_cost < res.history[0] / 10
    assert res.evals_used <= 50 * d
    # the returned excitation reproduces the reported cost
    assert template_cost(pattern_on_raster(g, w, Raster.default()), t, BORESIGHT) == pytest.approx(
        res.best_cost, rel=1e-9, abs=1e-9)
    assert np.abs(w.weights).max() == pytest.approx(1.0)


def test_widened_beam_is_wider():
    g = ArrayGeometry(16, 16)
    pencil = pencil_template(0.0554, 0.0554, -3.0, 0.15, 0.15, -20.0)
    wide = widen_template(pencil, 2, 2)
    d = 2 * g.n_alive
    w, res = synthesize_beam(g, wide, BORESIGHT, CmaConfig(sigma0=0.2, max_evals=50 * d, seed=1))
    ref = ExcitationVector.uniform(g)
    for axis in ("u", "v"):
        assert _cut_width(g, w, axis) >= 1.5 * _cut_width(g, ref, axis)


def test_widen_identity_and_scaling():
    t = pencil_template(0.03, 0.03, -3.0, 0.1, 0.1, -20.0)
    assert widen_template(t, 1, 1) == t
    t21 = widen_template(t, 2, 1)
    assert (t21.mainlobe.u_lo, t21.mainlobe.u_hi) == pytest.approx((-0.06, 0.06))
    assert (t21.mainlobe.v_lo, t21.mainlobe.v_hi) == pytest.approx((-0.03, 0.03))
    t22 = widen_template(t, 2, 2)
    assert t22.mainlobe.u_hi == pytest.approx(0.06) and t22.mainlobe.v_hi == pytest.approx(0.06)
    for r, _ in t22.sidelobe_mask:
        assert not r.interiors_overlap(t22.mainlobe)


def test_widen_rejects_bad_factors():
    t = pencil_template(0.03, 0.03, -3.0, 0.1, 0.1, -20.0)
    with pytest.raises(DomainError):
        widen_template(t, 0.5, 1)
    with pytest.raises(DomainError):
        widen_template(pencil_template(0.6, 0.6, -3.0, 0.7, 0.7, -20.0), 1.5, 1.5)


def test_dead_elements_stay_dead_and_warm_start():
    alive = [True] * 36
    for k in (0, 7, 20):
        alive[k] = False
    g = ArrayGeometry(6, 6, alive=tuple(alive))
    t = pencil_template(0.08, 0.08, -3.0, 0.4, 0.4, -15.0)
    r = Raster.default(49)
    cfg = CmaConfig(sigma0=0.2, max_evals=600, seed=3)
    w, res = synthesize_beam(g, t, BORESIGHT, cfg, raster=r)
    w.check(g)
    assert all(w.weights[k] == 0 for k in (0, 7, 20))
    w2, res2 = synthesize_beam(g, t, BORESIGHT, cfg, raster=r, warm_start=w)
    # a warm start from the previous best starts at (rescaled) that best
    assert res2.history[0] == pytest.approx(res.best_cost, rel=1e-9, abs=1e-9)


def test_phase_only_keeps_uniform_amplitude():
    g = ArrayGeometry(4, 4)
    t = pencil_template(0.1, 0.1, -3.0, 0.5, 0.5, -12.0)
    w, _ = synthesize_beam(g, t, Direction(0.2, 0.0), CmaConfig(sigma0=0.3, max_evals=300, seed=0),
                           raster=Raster.default(33), phase_only=True)
    assert np.allclose(np.abs(w.weights), 1.0)


def test_steered_initial_point_points_the_beam():
    g = ArrayGeometry(8, 8)
    steer = Direction(0.3, 0.1)
    prob = SynthesisProblem(g, pencil_template(0.05, 0.05, -3, 0.2, 0.2, -13), steer, Raster.default(129))
    w = prob.excitation(prob.initial_point())
    p = pattern_on_raster(g, w, Raster.default(129))
    assert abs(p.peak_direction.u - 0.3) <= 2 / 128 and abs(p.peak_direction.v - 0.1) <= 2 / 128
