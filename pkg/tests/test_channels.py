import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from iontwin.channels import (LossEntry, LossLedger, OpticalChannel, Stage, db_to_linear, delivered_power,
                              ledger_rows, linear_to_db, propagation_loss, total_loss)


def channel(losses, fiber_power=1e-3, **ledger_kw):
    entries = [LossEntry(stage, loss) for stage, loss in losses]
    return OpticalChannel("x", 674e-9, fiber_power, 500e-9, LossLedger(entries, **ledger_kw))


STAGES = list(Stage)


def fixture_ledger(values):
    return list(zip(STAGES, values))


def test_674_total():
    assert total_loss(channel(fixture_ledger([10, 0.4, 11, 3, 7]))) == 31.4


def test_422_total():
    assert total_loss(channel(fixture_ledger([10, 3, 12, 3, 7]))) == 35.0


def test_single_zero_entry():
    assert total_loss(channel([(Stage.GRATING, 0.0)])) == 0.0


def test_empty_ledger_rejected():
    with pytest.raises(ValueError):
        total_loss(channel([]))


def test_negative_loss_rejected():
    with pytest.raises(ValueError):
        LossEntry(Stage.GRATING, -1.0)


def test_delivered_power_674():
    # 10 mW - 31.4 dB, hand value 10 mW * 10**-3.14
    p = delivered_power(channel(fixture_ledger([10, 0.4, 11, 3, 7]), fiber_power=10e-3))
    assert p == pytest.approx(7.244359600749906e-6, rel=1e-12)
    assert p / 1e-6 == pytest.approx(7.24, abs=0.005)


def test_delivered_power_trivial():
    assert delivered_power(channel([(Stage.GRATING, 5.0)], fiber_power=0.0)) == 0.0
    assert delivered_power(channel([(Stage.GRATING, 10.0)], fiber_power=1e-3)) == pytest.approx(100e-6, rel=1e-12)


def test_propagation_examples():
    assert propagation_loss(0.53, 0.75) == pytest.approx(0.4, abs=0.01)
    assert propagation_loss(7.0, 0.0) == 0.0
    assert propagation_loss(10.0, 0.3) == pytest.approx(3.0, rel=1e-12)


def test_propagation_consistency_check():
    LossLedger([LossEntry(Stage.PROPAGATION, 0.4)], 0.75, 0.53)
    with pytest.raises(ValueError):
        LossLedger([LossEntry(Stage.PROPAGATION, 1.0)], 0.75, 0.53)


def test_ledger_rows_provenance():
    ch = OpticalChannel("1092", 1092e-9, 1e-3, 1.1e-6, LossLedger([
        LossEntry(Stage.ON_CHIP_COUPLING, 6), LossEntry(Stage.COOLDOWN, 7, inferred=True)]))
    rows = ledger_rows(ch)
    assert rows[-1] == ("total", 13, "inferred")
    assert rows[0][2] == "measured" and rows[1][2] == "inferred"


def test_fixture_totals(scn):
    totals = {label: total_loss(ch) for label, ch in scn.channels.items()}
    assert totals == {"422": 35.0, "461": 31.5, "674": 31.4, "1092": 26.4}


def test_fixture_1092_inferred_entries(scn):
    entries = scn.channels["1092"].ledger.entries
    inferred = {e.stage for e in entries if e.inferred}
    assert inferred == {Stage.FIBER_FEEDTHROUGH, Stage.COOLDOWN}


def test_shared_gratings(scn):
    # 405/422 and 1033/1092 pairs leave the chip from the same grating
    assert scn.beam_gratings["408"] == scn.beam_gratings["422"] == scn.channels["422"].grating
    assert scn.beam_gratings["1033"] == scn.beam_gratings["1092"] == scn.channels["1092"].grating


@given(st.floats(0, 80))
def test_db_round_trip(db):
    assert linear_to_db(db_to_linear(db)) == pytest.approx(db, rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(0, 20), min_size=1, max_size=5), st.floats(0, 1))
def test_delivered_power_linear_and_monotone(losses, p_in):
    ledger = [(STAGES[i % 5], x) for i, x in enumerate(losses)]
    base = delivered_power(channel(ledger, fiber_power=p_in))
    assert delivered_power(channel(ledger, fiber_power=2 * p_in)) == pytest.approx(2 * base, rel=1e-12)
    more = ledger + [(Stage.GRATING, 1.0)]
    assert delivered_power(channel(more, fiber_power=p_in)) <= base
    assert base == pytest.approx(p_in * math.prod(db_to_linear(x) for x in losses), rel=1e-9)
