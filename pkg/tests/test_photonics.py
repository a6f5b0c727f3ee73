import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iontwin import photonics as ph
from iontwin.errors import Evanescent, NoGuidedMode, NonIntersecting, Unreachable

STACK = ph.LayerStack()


def grid_root(n_core, n_clad, d, lam, pol="TE", n=200_001):
    """Independent oracle: the largest sign change of the slab residual on a dense grid."""
    grid = np.linspace(n_clad + 1e-12, n_core - 1e-12, n)
    r = np.array([ph.slab_dispersion_residual(x, n_core, n_clad, d, lam, pol) for x in grid])
    k = np.nonzero(np.sign(r[:-1]) != np.sign(r[1:]))[0]
    return grid[k[-1]], grid[1] - grid[0]


@pytest.mark.parametrize("pol", ["TE", "TM"])
def test_slab_against_grid_oracle(pol):
    n = ph.slab_neff(STACK, 633e-9, polarization=pol)
    ref, step = grid_root(1.89, 1.5, 100e-9, 633e-9, pol)
    assert 1.5 < n < 1.89
    assert abs(n - ref) <= step
    assert abs(ph.slab_dispersion_residual(n, 1.89, 1.5, 100e-9, 633e-9, pol)) < 1e-10


def test_slab_bulk_limit():
    assert ph.slab_neff(STACK, 633e-9, thickness=10e-6) == pytest.approx(1.89, abs=1e-3)


def test_slab_longer_wavelength_lower_index():
    assert ph.slab_neff(STACK, 1092e-9) < ph.slab_neff(STACK, 633e-9)


def test_slab_below_cutoff():
    with pytest.raises(NoGuidedMode):
        ph.symmetric_slab_neff(1.89, 1.5, 50e-9, 633e-9, order=1)


@given(st.floats(380e-9, 1200e-9), st.floats(60e-9, 400e-9))
def test_slab_bounds_and_residual(lam, d):
    n = ph.symmetric_slab_neff(1.89, 1.5, d, lam)
    assert 1.5 < n < 1.89
    assert abs(ph.slab_dispersion_residual(n, 1.89, 1.5, d, lam)) < 1e-10


@pytest.mark.parametrize("width,lam,expected", [
    (250e-9, 405e-9, True), (1.1e-6, 1092e-9, True), (1.1e-6, 405e-9, False)])
def test_single_mode_verdicts(width, lam, expected):
    assert ph.waveguide_neff(STACK, width, lam).single_mode is expected


def test_waveguide_index_below_slab():
    m = ph.waveguide_neff(STACK, 500e-9, 674e-9)
    assert 1.5 < m.n_eff < m.n_slab < 1.89


def grating(period, n_eff=1.7, **kw):
    return ph.GratingSpec(period=period, n_eff_tooth=n_eff, n_eff_gap=n_eff, **kw)


def test_vertical_emission():
    assert ph.emission_angle(grating(674e-9 / 1.7), 674e-9) == pytest.approx(0.0, abs=1e-9)
    assert ph.design_period(1.7, 674e-9, 0.0) == pytest.approx(674e-9 / 1.7, rel=1e-15)


def test_design_round_trip():
    g = grating(ph.design_period(1.7, 674e-9, 35.0))
    assert ph.emission_angle(g, 674e-9) == pytest.approx(35.0, abs=1e-9)


@given(st.floats(1.45, 1.85), st.floats(400e-9, 1100e-9), st.floats(-60, 60), st.integers(1, 3))
def test_design_inverse_identity(n_eff, lam, angle, order):
    g = grating(ph.design_period(n_eff, lam, angle, order), n_eff)
    got = ph.emission_angle(g, lam, order)
    assert got == pytest.approx(angle, abs=1e-9)
    assert abs(ph.phase_matching_residual(g, lam, got, order)) < 1e-10


def test_1033_and_1092_leave_at_different_angles(scn):
    g = scn.gratings["g_ir"]
    assert abs(ph.emission_angle(g, 1033e-9) - ph.emission_angle(g, 1092e-9)) > 0.1


@given(st.floats(400e-9, 1000e-9), st.floats(1e-9, 50e-9))
def test_angle_monotone_in_wavelength(lam, dl):
    g = grating(ph.design_period(1.7, 700e-9, 20.0))
    try:
        a, b = ph.emission_angle(g, lam), ph.emission_angle(g, lam + dl)
    except Evanescent:
        return
    assert b < a


def test_index_increase_tilts_forward():
    g = grating(ph.design_period(1.7, 674e-9, 35.0))
    angles = [ph.emission_angle(g, 674e-9, index_error=dn) for dn in np.linspace(0, 0.05, 11)]
    assert np.all(np.diff(angles) > 0)


def test_unreachable_and_evanescent():
    with pytest.raises(Unreachable):
        ph.design_period(0.5, 674e-9, 80.0)
    with pytest.raises(Evanescent):
        ph.emission_angle(grating(100e-9), 674e-9)


def test_orders():
    lam = 674e-9
    assert ph.diffraction_orders(grating(0.9 * lam / 2.7), lam) == []
    assert len(ph.diffraction_orders(grating(5 * lam / 1.7), lam)) >= 2


def test_fixture_674_has_first_order(scn):
    orders = dict(ph.diffraction_orders(scn.gratings["g_674"], 674e-9, scn.index_error))
    assert 1 in orders


def test_grating_index_between_tooth_and_gap():
    tooth, gap, mix = ph.grating_indices(STACK, 674e-9, 0.3)
    assert gap < mix < tooth
    full = ph.LayerStack(etch_depth=100e-9)
    t_full, g_full, _ = ph.grating_indices(full, 674e-9)
    assert tooth - gap < t_full - g_full


def opposed_pair(angle=40.0, height=55e-6, lam=674e-9):
    d = height * math.tan(math.radians(angle))
    target = (0.0, 0.0, height)
    ga = ph.design_grating(STACK, lam, (0.0, d, 0.0), target)
    gb = ph.design_grating(STACK, lam, (0.0, -d, 0.0), target)
    return ga, gb, d


def test_design_crossing_round_trip():
    ga, gb, _ = opposed_pair()
    c = ph.intersection_height(ga, gb, 674e-9, 674e-9)
    assert c.height == pytest.approx(55e-6, rel=1e-9)
    assert c.miss_distance < 1e-15


@pytest.mark.parametrize("offset", [1.0, -1.0, 2.5])
def test_angle_perturbation_against_ray_geometry(offset):
    ga, gb, d = opposed_pair()
    c = ph.intersection_height(ga, gb, 674e-9, 674e-9, angle_offsets=(offset, 0.0))
    ta, tb = math.tan(math.radians(40 + offset)), math.tan(math.radians(40))
    assert c.height == pytest.approx(2 * d / (ta + tb), rel=1e-9)


def test_index_error_moves_crossing_monotonically():
    ga, gb, _ = opposed_pair()
    h = [ph.intersection_height(ga, gb, 674e-9, 674e-9, dn).height for dn in np.linspace(-0.08, 0.05, 14)]
    assert np.all(np.diff(h) < 0)  # lower index: steeper beams, higher crossing


def test_fixture_index_error_gives_65um(scn):
    ga, gb = scn.gratings["g_674"], scn.gratings["g_blue"]
    c0 = ph.intersection_height(ga, gb, 674e-9, 422e-9)
    c = ph.intersection_height(ga, gb, 674e-9, 422e-9, scn.index_error)
    assert c0.height == pytest.approx(55e-6, rel=1e-9)
    assert c.height == pytest.approx(65e-6, rel=1e-9)
    assert np.sign(c.height - c0.height) == np.sign(scn.index_error * c0.dz_dn)
    dn = ph.index_error_for_height(ga, gb, 674e-9, 422e-9, 65e-6)
    assert dn == pytest.approx(scn.index_error, abs=1e-9)


def test_diverging_beams():
    lam = 674e-9
    ga = ph.design_grating(STACK, lam, (0.0, 0.0, 0.0), (0.0, -30e-6, 55e-6))
    gb = ph.design_grating(STACK, lam, (0.0, 10e-6, 0.0), (0.0, 40e-6, 55e-6))
    with pytest.raises(NonIntersecting):
        ph.intersection_height(ga, gb, lam, lam)
