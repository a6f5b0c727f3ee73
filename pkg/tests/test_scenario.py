import copy
import json

import pytest

from iontwin import scenario
from iontwin.errors import ScenarioError


@pytest.fixture()
def raw():
    return json.loads(scenario.fixture_path().read_text())


def test_fixture_loads(scn):
    assert scn.name == scenario.FIXTURE_NAME
    assert len(scn.sha256) == 64
    assert set(scn.beams) >= {"674", "422", "408", "1092", "1033", "461"}
    assert scn.ion_height == pytest.approx(55e-6)


def test_from_dict_matches_file(raw, scn):
    other = scenario.from_dict(raw)
    assert other.beams["674"] == scn.beams["674"]


@pytest.mark.parametrize("mutate,path", [
    (lambda r: r["channels"][0]["losses"][0].__setitem__("loss_db", -1), "channels/0/losses/0/loss_db"),
    (lambda r: r["trap"].pop("rf_frequency_mhz"), "trap"),
    (lambda r: r["beams"][1].__setitem__("direction", [0, 1]), "beams/1/direction"),
    (lambda r: r.__setitem__("unexpected", 1), "<root>"),
    (lambda r: r["ramsey"].__setitem__("phases", 2), "ramsey/phases"),
])
def test_schema_errors_name_the_key(raw, mutate, path):
    mutate(raw)
    with pytest.raises(ScenarioError) as exc:
        scenario.from_dict(raw)
    assert exc.value.path == path


@pytest.mark.parametrize("mutate,path", [
    (lambda r: r["beams"][0].__setitem__("channel", "nope"), "beams/0/channel"),
    (lambda r: r["rabi"].__setitem__("beam", "nope"), "rabi/beam"),
    (lambda r: r["fluorescence"].__setitem__("beam_422", "nope"), "fluorescence/beam_422"),
    (lambda r: r["probes"]["targets"][0].__setitem__("beam", "nope"), "probes/targets/0/beam"),
    (lambda r: r["gratings"].append(copy.deepcopy(r["gratings"][0])), "gratings"),
])
def test_bad_references(raw, mutate, path):
    mutate(raw)
    with pytest.raises(ScenarioError) as exc:
        scenario.from_dict(raw)
    assert exc.value.path == path


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ScenarioError):
        scenario.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError) as exc:
        scenario.load(bad)
    assert str(bad) in str(exc.value)


def test_scan_axis(scn):
    y = scn.scan_y
    assert y[0] == pytest.approx(-35e-6) and y[-1] == pytest.approx(35e-6)
    assert len(y) == 141
