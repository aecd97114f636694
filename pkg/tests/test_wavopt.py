import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from oracles import marcum_q1, pd_binary_enum, radar_snr_db, swerling1_by_averaging, waveform_min_cost_enum
from radopt.errors import DomainError, WaveformInfeasibleError
from radopt.wavopt import (C, Burst, RadarParams, Waveform, WaveformEvaluator, WaveformRequirement, blind_range,
                           blind_velocity, detection_range, dwell_time, dwell_time_us, enumerate_waveforms,
                           optimize_waveform, pd_binary, pd_single_burst, snr_single_burst, visibility_map)

B1 = Burst(1e-3, 10e-6, 16, 3e9)


def test_blind_range_examples():
    assert blind_range(B1, 100.0)
    assert not blind_range(B1, 75e3)
    assert blind_range(B1, C * 1e-3 / 2)


def test_blind_velocity_examples():
    assert blind_velocity(B1, 0.0, 1.0)
    assert not blind_velocity(B1, 25.0, 200.0)
    v_alias = B1.prf_hz * C / (2 * B1.carrier_hz)
    assert blind_velocity(B1, v_alias, 200.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-5, 2e-3), st.floats(0.01, 0.5), st.floats(0, 3e5), st.integers(0, 20))
def test_blind_range_periodic(pri, duty, r, k):
    b = Burst(pri, duty * pri, 4)
    period_m = C * pri / 2
    tau = math.fmod(2 * r / C, pri)
    # stay clear of the eclipse edge and the fold point, where rounding decides
    assume(abs(tau - b.pulse_width_s) > 1e-6 * pri and 1e-6 * pri < tau < pri * (1 - 1e-6))
    assert blind_range(b, r) == blind_range(b, r + k * period_m)


def test_visibility_examples():
    ranges = np.linspace(1.0, C * 9e-6 / 2, 20)    # all inside the first 10 us eclipse
    vels = np.linspace(-300, 300, 21)
    assert np.all(visibility_map(Waveform((B1,), (1, 1)), ranges, vels, 200).visible == 0)

    ranges = np.linspace(1e3, 300e3, 400)
    vels = np.linspace(-300, 300, 121)
    b2 = Burst(1.3e-3, 10e-6, 16, 3e9)
    both = visibility_map(Waveform((B1, b2), (1, 2)), ranges, vels, 200).clear.sum()
    for b in (B1, b2):
        assert both > visibility_map(Waveform((b,), (1, 1)), ranges, vels, 200).clear.sum()

    vm = visibility_map(Waveform((B1,) * 3, (1, 3)), ranges, vels, 200)
    assert set(np.unique(vm.visible)) <= {0, 3}


bursts = st.builds(lambda pri, duty, n: Burst(pri, duty * pri, n),
                   st.floats(2e-5, 2e-3), st.floats(0.01, 0.3), st.integers(1, 64))


@settings(max_examples=60, deadline=None)
@given(st.lists(bursts, min_size=1, max_size=3), bursts)
def test_adding_a_burst_never_reduces_visibility(base, extra):
    ranges = np.linspace(100, 150e3, 64)
    vels = np.linspace(-300, 300, 31)
    before = visibility_map(Waveform(tuple(base), (1, len(base))), ranges, vels, 200).visible
    after = visibility_map(Waveform(tuple(base) + (extra,), (1, len(base) + 1)), ranges, vels, 200).visible
    assert np.all(after >= before)
    assert np.all((0 <= after) & (after <= len(base) + 1))


P_REF = RadarParams(10e3, 6.0, 5.0, 1.0, 1e-6)


def test_snr_deltas_exact():
    b2 = Burst(1e-3, 10e-6, 32, 3e9)
    assert snr_single_burst(P_REF, b2, 1e5, 35) - snr_single_burst(P_REF, B1, 1e5, 35) == pytest.approx(
        10 * math.log10(2), abs=1e-9)
    assert snr_single_burst(P_REF, B1, 5e4, 35) - snr_single_burst(P_REF, B1, 1e5, 35) == pytest.approx(
        40 * math.log10(2), abs=1e-9)
    assert 10 * math.log10(2) == pytest.approx(3.0103, abs=5e-5)
    assert 40 * math.log10(2) == pytest.approx(12.0412, abs=5e-5)


SNR_REF_DB = 12.034080064289753  # term-by-term dB evaluation of the reference set, frozen


def test_snr_reference_set():
    got = snr_single_burst(P_REF, B1, 1e5, 35.0)
    assert got == pytest.approx(radar_snr_db(10e3, 35, 3e9, 1, 10e-6, 16, 5, 6, 1e5), abs=1e-9)
    assert got == pytest.approx(SNR_REF_DB, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e3, 1e6), st.floats(1.0001, 3.0))
def test_snr_strictly_decreasing_in_range(r, factor):
    assert snr_single_burst(P_REF, B1, r * factor, 30) < snr_single_burst(P_REF, B1, r, 30)


def test_swerling1_examples():
    assert pd_single_burst(13.0, 1e-6) == pytest.approx(1e-6 ** (1 / (1 + 10 ** 1.3)), rel=1e-12)
    assert pd_single_burst(13.0, 1e-6) == pytest.approx(0.517, abs=5e-4)
    assert abs(pd_single_burst(-300.0, 1e-6) - 1e-6) < 1e-9


@pytest.mark.parametrize("snr_db", [-5.0, 0.0, 5.0, 10.0, 13.0, 20.0])
def test_swerling1_matches_averaged_marcum(snr_db):
    assert pd_single_burst(snr_db, 1e-6, "swerling1") == pytest.approx(
        swerling1_by_averaging(10 ** (snr_db / 10), 1e-6), abs=1e-7)


@pytest.mark.parametrize("snr_db", [-10.0, 0.0, 6.0, 10.0, 13.0, 16.0])
@pytest.mark.parametrize("pfa", [1e-3, 1e-6, 1e-8])
def test_steady_matches_marcum_quadrature(snr_db, pfa):
    snr = 10 ** (snr_db / 10)
    assert pd_single_burst(snr_db, pfa, "steady") == pytest.approx(
        marcum_q1(math.sqrt(2 * snr), math.sqrt(-2 * math.log(pfa))), abs=1e-9)


def test_steady_limit_is_pfa():
    assert pd_single_burst(-300.0, 1e-4, "steady") == pytest.approx(1e-4, rel=1e-9)


def test_pd_single_burst_domain():
    with pytest.raises(DomainError):
        pd_single_burst(10.0, 1.0)
    with pytest.raises(DomainError):
        pd_single_burst(10.0, 1e-6, "swerling3")


def test_pd_binary_examples():
    assert pd_binary([0.5, 0.5, 0.5], 2) == pytest.approx(0.5, abs=1e-15)
    assert pd_binary([0.37], 1) == pytest.approx(0.37, abs=1e-15)
    assert pd_binary([0.9, 0.8, 0.7], 2) == pytest.approx(0.902, abs=1e-12)
    with pytest.raises(DomainError):
        pd_binary([0.5], 2)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.data())
def test_pd_binary_matches_enumeration(pds, data):
    m = data.draw(st.integers(1, len(pds)))
    assert pd_binary(pds, m) == pytest.approx(pd_binary_enum(pds, m), abs=1e-12)


def test_dwell_time_examples():
    assert dwell_time(Waveform((Burst(1e-3, 1e-5, 16),), (1, 1))) == pytest.approx(0.016, abs=1e-15)
    one = Waveform((B1,), (1, 1))
    assert dwell_time(Waveform((B1, B1), (1, 2))) == pytest.approx(2 * dwell_time(one), abs=1e-15)
    w = Waveform((Burst(1e-3, 1e-5, 16), Burst(1.3e-3, 1e-5, 12)), (1, 2))
    assert dwell_time(w) == pytest.approx(0.0316, abs=1e-12)
    assert dwell_time_us(w) == 31600


def test_waveform_invariants():
    with pytest.raises(DomainError):
        Waveform((B1,), (2, 1))
    with pytest.raises(DomainError):
        Burst(1e-3, 2e-3, 4)


def test_unconstrained_requirement_picks_cheapest_burst():
    req = WaveformRequirement(50e3, min_pd=0.0, clear_fraction=0.0)
    cat = [Burst(1e-3, 1e-5, 16)]
    w = optimize_waveform(P_REF, req, cat, 30.0)
    assert w.bursts == (cat[0],) and w.m_of_n == (1, 1)
    cat = [Burst(1e-3, 1e-5, 16), Burst(5e-4, 1e-5, 16), Burst(8e-4, 1e-5, 8)]
    assert optimize_waveform(P_REF, req, cat, 30.0).bursts == (cat[2],)


def test_forced_infeasible_names_detection():
    req = WaveformRequirement(1e7, min_pd=0.999, clear_fraction=0.0)
    with pytest.raises(WaveformInfeasibleError) as e:
        optimize_waveform(P_REF, req, [B1, Burst(1.3e-3, 1e-5, 16)], 30.0)
    assert e.value.report.binding == "detection"
    assert "detection" in str(e.value)


def _mprf_catalog(rng=None):
    pris = [60e-6, 69e-6, 77e-6, 83e-6, 91e-6, 100e-6] if rng is None else sorted(rng.uniform(40e-6, 200e-6, 6))
    return [Burst(p, 4e-6, 32) for p in pris]


def _oracle(p, req, cat, gain, max_bursts=4):
    return waveform_min_cost_enum(WaveformEvaluator(p, req, cat, gain), max_bursts)


def test_six_entry_catalog_matches_enumeration():
    p = RadarParams(100e3, 6, 5, 1, 1e-6)
    req = WaveformRequirement(60e3, (-300, 300), min_pd=0.9, clear_fraction=0.9, n_range=256, n_velocity=61)
    cat = _mprf_catalog()
    w = optimize_waveform(p, req, cat, 30.0)
    assert sum(b.duration_ns for b in w.bursts) == _oracle(p, req, cat, 30.0)
    assert enumerate_waveforms(p, req, cat, 30.0) == w


def test_detection_range_brackets_min_pd():
    p = RadarParams(100e3, 6, 5, 1, 1e-6)
    w = Waveform((Burst(60e-6, 8e-6, 64), Burst(69e-6, 8e-6, 64)), (1, 2))
    r = detection_range(p, w, 25.0, 0.8)

    def pd(rr):
        return pd_binary([pd_single_burst(snr_single_burst(p, b, rr, 25.0), p.pfa) for b in w.bursts], 1)

    assert pd(r) >= 0.8 > pd(r * (1 + 1e-9))
