import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iontwin import insitu
from iontwin.reproduce import PROFILE_ANCHORS, profile_results

UM = 1e-6


@pytest.fixture(scope="module")
def results(scn):
    return profile_results(scn)


def test_every_probe_matches_the_cut(results):
    assert {r.probe for r in results} == {"rabi", "fluor", "quench", "shelve"}
    for r in results:
        assert abs(r.center_error) <= 0.03 * r.cut.diameter, r.beam
        assert abs(r.diameter_ratio - 1) <= 0.03, r.beam


def test_fitted_diameters_match_anchors(results):
    for r in results:
        assert r.fit.diameter / UM == pytest.approx(PROFILE_ANCHORS[r.beam], rel=0.02)


def test_scan_follows_the_null(results, scn):
    pos = results[0].positions
    assert np.all(np.diff(pos[:, 1]) > 0)
    assert np.ptp(pos[:, 2]) < 0.1 * UM


@pytest.mark.parametrize("kind,beam", [("rabi", "674"), ("fluor", "422"), ("fluor", "1092"),
                                       ("quench", "1033"), ("shelve", "408")])
def test_probe_inversion(scn, kind, beam):
    probe = scn.probe(kind, beam)
    peak = insitu.peak_on_line(scn.beams[beam], scn.ion_height)
    i = peak * np.linspace(0.01, 1.0, 50)
    assert np.allclose(probe.invert(probe.signal(i)), i, rtol=1e-9)


@given(st.floats(0.0, 1.0))
def test_quench_probe_monotone(frac):
    p = insitu.QuenchProbe(k_quench=1e-3, duration=2e-6)
    assert p.signal(frac * 1e8) >= p.signal(1e8)
