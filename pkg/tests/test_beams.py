import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iontwin import beams as bm
from iontwin.errors import DegenerateFit
from iontwin.reproduce import reconstruction_errors

UM = 1e-6


def vertical(wf=3e-6, wu=5e-6, power=1e-3, **kw):
    return bm.BeamField(674e-9, power, (0, 0, 0), (0, 0, 1), wf, wu, **kw)


def test_peak_formula():
    b = vertical()
    assert bm.intensity_at(b, [0, 0, 0]) == pytest.approx(bm.peak_intensity(1e-3, 6e-6, 10e-6), rel=1e-12)
    assert bm.peak_intensity(1e-3, 6e-6, 10e-6) == pytest.approx(8e-3 / (math.pi * 60e-12), rel=1e-15)


def test_e2_point():
    b = vertical()
    i0 = bm.intensity_at(b, [0, 0, 0])
    d, u, v = b.frame()
    assert bm.intensity_at(b, 3e-6 * u) / i0 == pytest.approx(math.exp(-2), rel=1e-12)
    assert bm.intensity_at(b, 5e-6 * v) / i0 == pytest.approx(math.exp(-2), rel=1e-12)


@pytest.mark.parametrize("s", [0.0, 20e-6, 80e-6])
def test_transverse_power_conserved(s):
    b = bm.BeamField.from_angles(422e-9, 2e-3, (0, 0, 0), 35, 90, waist_focused=2.5e-6,
                                 waist_unfocused=4e-6, focus_focused=40e-6)
    assert bm.transverse_power(b, s) == pytest.approx(2e-3, rel=1e-6)


@given(st.floats(0, 60), st.floats(0, 360), st.floats(0, 100e-6))
def test_centreline_geometry(angle, azimuth, z):
    b = bm.BeamField.from_angles(674e-9, 1.0, (0, 0, 0), angle, azimuth,
                                 waist_focused=3e-6, waist_unfocused=4e-6)
    p = b.point_at_height(z)
    assert p[2] == pytest.approx(z, abs=1e-18)
    assert math.hypot(p[0], p[1]) == pytest.approx(z * math.tan(math.radians(angle)), abs=1e-15)
    d, u, v = b.frame()
    assert np.allclose(np.array([d, u, v]) @ np.array([d, u, v]).T, np.eye(3), atol=1e-12)


def test_width_minimal_at_focus():
    b = vertical(focus_focused=30e-6, focus_unfocused=-10e-6)
    s = np.linspace(-100e-6, 100e-6, 2001)
    wf, wu = b.widths(s)
    assert s[np.argmin(wf)] == pytest.approx(30e-6, abs=1e-7)
    assert s[np.argmin(wu)] == pytest.approx(-10e-6, abs=1e-7)
    assert wf.min() == pytest.approx(3e-6, rel=1e-9)


def test_fit_profile_recovers_gaussian():
    y = np.linspace(-20e-6, 20e-6, 161)
    fit = bm.fit_profile(y, bm.gaussian_profile(y, 3.0, 2e-6, 4e-6))
    assert fit.center == pytest.approx(2e-6, rel=1e-9)
    assert fit.diameter == pytest.approx(8e-6, rel=1e-9)
    assert fit.center_err == 0.0


def test_fit_profile_rejects_empty():
    with pytest.raises(DegenerateFit):
        bm.fit_profile(np.linspace(0, 1, 10), np.zeros(10))


def test_focal_stack_validation():
    with pytest.raises(ValueError):
        bm.FocalStack(np.array([1.0, 0.0]), np.zeros(3), np.zeros(3), np.zeros((2, 3, 3)))


def test_vertical_beam_centroids_fixed():
    b = vertical(wf=3e-6, wu=3e-6, focus_focused=50e-6, focus_unfocused=50e-6)
    stack = bm.synthesize_stack(b, half_width=30e-6)
    e = bm.reconstruct_beam(stack)
    assert e.angle_deg == pytest.approx(0.0, abs=1e-6)
    assert e.centroid_rms < 1e-12


def test_tilted_centroid_slope():
    b = bm.BeamField.from_angles(674e-9, 1.0, (0, 0, 0), 30, 90, waist_focused=3e-6, waist_unfocused=4e-6,
                                 focus_focused=58e-6, focus_unfocused=58e-6)
    c = b.point_at_height(50e-6)
    e = bm.reconstruct_beam(bm.synthesize_stack(b, half_width=60e-6, center=(c[0], c[1])))
    # the oblique cut biases centroids slightly toward the wider side of the slice
    assert e.direction[1] / e.direction[2] == pytest.approx(math.tan(math.radians(30)), rel=5e-3)
    assert e.azimuth_deg == pytest.approx(90.0, abs=1e-3)


def test_collimated_beam_is_degenerate():
    b = vertical(wf=200e-6, wu=200e-6)
    stack = bm.synthesize_stack(b, heights=np.array([0.0, 1e-6, 2e-6]), half_width=5e-6, spacing=1e-6)
    with pytest.raises(DegenerateFit):
        bm.reconstruct_beam(stack)


@pytest.mark.parametrize("name", ["674", "422", "1092"])
def test_noise_free_reconstruction(scn, name):
    assert reconstruction_errors(scn.beams[name]) < 0.01


def test_noisy_reconstruction_monte_carlo(scn):
    beam = scn.beams["674"]
    errs = [reconstruction_errors(beam, 0.01, np.random.default_rng(k)) for k in range(20)]
    assert max(errs) < 0.05


def test_add_noise_is_seeded():
    stack = bm.synthesize_stack(vertical(), heights=np.array([0.0, 5e-6, 10e-6]), half_width=10e-6)
    a = bm.add_noise(stack, 0.01, np.random.default_rng(3))
    b = bm.add_noise(stack, 0.01, np.random.default_rng(3))
    assert np.array_equal(a.slices, b.slices)
    assert a.slices.min() >= 0


@pytest.mark.parametrize("name,center,diameter", [("674", 13, 13), ("422", -11, 8.5), ("1092", 0, 5.5),
                                                  ("1033", 0, 6.7), ("408", 11.4, 11.3)])
def test_fixture_cuts(scn, name, center, diameter):
    fit = bm.axial_cut(scn.beams[name], scn.ion_height).fit
    assert fit.center / UM == pytest.approx(center, abs=1e-6)
    assert fit.diameter / UM == pytest.approx(diameter, rel=1e-6)


def test_calibrate_to_cut_round_trip():
    b = bm.BeamField.from_angles(674e-9, 1.0, (0, -40e-6, 0), 40, 90, waist_focused=3e-6,
                                 waist_unfocused=5e-6, focus_unfocused=72e-6)
    cal = bm.calibrate_to_cut(b, 55e-6, 4e-6, 10e-6)
    fit = bm.axial_cut(cal, 55e-6).fit
    assert fit.center == pytest.approx(4e-6, abs=1e-14)
    assert fit.diameter == pytest.approx(10e-6, rel=1e-9)


def test_calibrate_to_unreachable_diameter():
    # a waist focused 72 um away cannot produce a 3 um wide oblique cut
    b = bm.BeamField.from_angles(674e-9, 1.0, (0, -46e-6, 0), 40, 90, waist_focused=3e-6,
                                 waist_unfocused=5e-6)
    with pytest.raises(DegenerateFit):
        bm.calibrate_to_cut(b, 55e-6, 0.0, 3e-6)


def test_repump_beams_both_address_ion(scn):
    ion = np.array([0.0, 0.0, scn.ion_height])
    b92, b33 = scn.beams["1092"], scn.beams["1033"]
    sep = np.linalg.norm(b92.point_at_height(scn.ion_height) - b33.point_at_height(scn.ion_height))
    s = np.linalg.norm(b92.point_at_height(scn.ion_height) - np.asarray(b92.origin))
    assert sep < b92.widths(s)[1]
    for b in (b92, b33):
        peak = bm.intensity_at(b, b.point_at_height(scn.ion_height))
        assert bm.intensity_at(b, ion) / peak > math.exp(-2)
