import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iontwin import coherence as co
from iontwin.errors import DegenerateTrack, FitFailure, InsufficientStatistics
from iontwin.reproduce import ramsey_sweep


@pytest.fixture(scope="module")
def sweep(scn):
    return ramsey_sweep(scn, scn.seed)


def test_baseline_tau_both_deliveries(sweep, scn):
    for delivery in (co.FREE_SPACE, co.INTEGRATED):
        assert sweep[delivery][0].fitted_tau == pytest.approx(scn.vibration.baseline_coherence, rel=0.05)


def test_free_space_decreasing(sweep):
    taus = [r.fitted_tau for r in sweep[co.FREE_SPACE]]
    assert np.all(np.diff(taus) < 0)


def test_contrast_bounded(sweep):
    for res in sweep.values():
        for r in res:
            assert np.all(r.contrasts <= 1.0)


def test_integrated_flat_with_independent_seeds(scn):
    """Each acceleration gets its own seed, so the comparison is statistical."""
    integ = replace(scn.vibration, delivery=co.INTEGRATED)
    res = [co.ramsey_scan(integ.with_acceleration(a), scn.ramsey_delays, scn.ramsey_phases,
                          scn.ramsey_shots, seed=100 + k)
           for k, a in enumerate(scn.ramsey_accelerations)]
    t0 = res[0]
    for r in res[1:]:
        assert abs(r.fitted_tau - t0.fitted_tau) <= 3 * math.hypot(r.tau_error, t0.tau_error)


def test_integrated_phase_is_zero(scn):
    v = replace(scn.vibration, delivery=co.INTEGRATED).with_acceleration(10.0)
    assert np.all(co.vibration_phase(v, 1e-4, np.linspace(0, 6, 7)) == 0)


def test_determinism(scn):
    v = scn.vibration.with_acceleration(1.0)
    a = co.ramsey_scan(v, co.default_delays(), 8, 200, seed=4)
    b = co.ramsey_scan(v, co.default_delays(), 8, 200, seed=4)
    assert np.array_equal(a.contrasts, b.contrasts) and a.fitted_tau == b.fitted_tau


def test_phase_noise_variance():
    rng = np.random.default_rng(0)
    assert np.all(co.baseline_phase_noise(0.0, 600e-6, rng, 10) == 0)
    x = co.baseline_phase_noise(600e-6, 600e-6, rng, 100_000)
    assert np.var(x) == pytest.approx(2.0, rel=0.02)
    assert np.mean(np.cos(x)) == pytest.approx(math.exp(-1), abs=0.01)
    with pytest.raises(ValueError):
        co.baseline_phase_noise(-1.0, 600e-6, rng)


def test_doppler_round_trip(scn):
    w = 2 * math.pi * 67
    amp = co.amplitude_for_doppler(9e3, w)
    v = co.VibrationScenario(amp, w)
    assert co.doppler_peak(v) == pytest.approx(9e3, rel=1e-14)
    assert co.doppler_peak(scn.vibration) == pytest.approx(9e3, rel=1e-12)
    assert v.with_acceleration(v.peak_acceleration).amplitude == pytest.approx(amp, rel=1e-14)


@given(st.floats(1e-6, 1e-3), st.floats(5.0, 500.0))
@settings(max_examples=20)
def test_circular_track(r, f):
    w = 2 * math.pi * f
    t = np.linspace(0, 8 / f, 400)
    xy = r * np.column_stack([np.cos(w * t), np.sin(w * t)])
    assert co.acceleration_from_track(xy, t) == pytest.approx(r * w * w, rel=0.02)


def test_fixture_vibration_track(scn):
    v = scn.vibration
    t = np.linspace(0, 15e-3, 200)
    xy = v.amplitude * np.column_stack([np.cos(v.frequency * t), np.sin(v.frequency * t)])
    assert co.acceleration_from_track(xy, t) == pytest.approx(v.peak_acceleration, rel=0.02)


def test_degenerate_tracks():
    assert co.acceleration_from_track(np.zeros((10, 2)), np.arange(10.0)) == 0.0
    with pytest.raises(DegenerateTrack):
        co.acceleration_from_track(np.zeros((2, 2)), np.arange(2.0))
    with pytest.raises(DegenerateTrack):
        co.acceleration_from_track(1e-9 * np.ones((10, 2)) * np.arange(10)[:, None], np.arange(10.0),
                                   resolution=1e-6)


def test_fringe_fit_exact():
    phases = np.arange(8) * 2 * math.pi / 8
    p = 0.5 * (1 + 0.7 * np.cos(phases + 0.3))
    fit = co.fit_fringe(phases, p, 1000)
    assert fit.contrast == pytest.approx(0.7, rel=1e-12)
    assert fit.offset == pytest.approx(0.5, rel=1e-12)


def test_exponential_fit_exact():
    T = co.default_delays()
    C = 0.95 * np.exp(-T / 250e-6)
    fit = co.fit_exponential(T, C, np.full_like(T, 0.01))
    assert fit.tau == pytest.approx(250e-6, rel=1e-9)
    assert fit.amplitude == pytest.approx(0.95, rel=1e-9)


def test_exponential_fit_failures():
    with pytest.raises(FitFailure):
        co.fit_exponential([0, 1e-4, 2e-4], [0.5, 0.7, 0.9], [0.01] * 3)
    with pytest.raises(FitFailure):
        co.fit_exponential([0, 1e-4], [1.0, 0.9], [0.01] * 2)


def result(tau, err):
    return co.RamseyResult(np.zeros(3), np.zeros(3), np.zeros(3), tau, err)


def test_suppression_bound_against_weighted_slope():
    a = np.linspace(0, 2.5, 6)
    free = [result(600e-6 * math.exp(-2 * x), 0.05 * 600e-6 * math.exp(-2 * x)) for x in a]
    integ = [result(600e-6, 0.05 * 600e-6) for _ in a]
    sigma = 0.05 / math.sqrt(np.sum((a - a.mean()) ** 2))
    assert co.suppression_bound(a, free, integ) == pytest.approx(2 / sigma, rel=1e-9)
    tighter = [result(600e-6, 0.025 * 600e-6) for _ in a]
    assert co.suppression_bound(a, free, tighter) == pytest.approx(2 * co.suppression_bound(a, free, integ))


def test_suppression_bound_errors():
    a = [0.0, 1.0, 2.0]
    with pytest.raises(InsufficientStatistics):
        co.suppression_bound(a, [result(1.0, 0.1)] * 3, [result(1.0, 0.0)] * 3)
    with pytest.raises(ValueError):
        co.suppression_bound(a, [result(1.0, 0.1)] * 2, [result(1.0, 0.1)] * 3)


def test_scan_validation(scn):
    with pytest.raises(ValueError):
        co.ramsey_scan(scn.vibration, [0, 2e-5, 1e-5])
    with pytest.raises(ValueError):
        co.ramsey_scan(scn.vibration, co.default_delays(), phases=4)
    with pytest.raises(ValueError):
        co.ramsey_scan(scn.vibration, co.default_delays(), shots_per_point=10)
