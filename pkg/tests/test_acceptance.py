"""The nine acceptance criteria, each at its stated tolerance and runtime budget.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""
import time

import pytest

from iontwin import cli, reproduce

from conftest import ACCEPTANCE


def evaluate(n, title, budget, fn):
    t0 = time.perf_counter()
    checks = fn()
    secs = time.perf_counter() - t0
    failed = [c for c in checks if not c.passed]
    ok = not failed and secs < budget
    ACCEPTANCE[n] = (ok, title, secs)
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {title}")
    for c in checks:
        print("   ", c.row())
    assert not failed, [c.row() for c in failed]
    assert secs < budget, f"took {secs:.1f} s, budget {budget} s"


def test_criterion_1_loss_ledger(scn):
    evaluate(1, "loss ledger totals", 1, lambda: reproduce.criterion_loss(scn))


def test_criterion_2_detection(scn):
    evaluate(2, "detection fidelity and dark-state model", 30,
             lambda: reproduce.criterion_detection(scn, scn.seed))


def test_criterion_3_pi_time(scn):
    evaluate(3, "pi time", 1, lambda: reproduce.criterion_pi_time(scn))


def test_criterion_4_spectroscopy(scn):
    evaluate(4, "sideband spectroscopy and thermometry", 10, lambda: reproduce.criterion_spectroscopy(scn))


def test_criterion_5_profiling(scn):
    evaluate(5, "in-situ beam profiling", 30, lambda: reproduce.criterion_profiling(scn))


def test_criterion_6_trap(scn):
    evaluate(6, "trap electrostatics", 60, lambda: reproduce.criterion_trap(scn))


def test_criterion_7_ramsey(scn):
    evaluate(7, "Ramsey coherence under vibration", 300, lambda: reproduce.criterion_ramsey(scn, scn.seed))


def test_criterion_8_photonics(scn):
    evaluate(8, "photonics", 30, lambda: reproduce.criterion_photonics(scn, scn.seed))


def test_criterion_9_determinism(tmp_path):
    t0 = time.perf_counter()
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert cli.main(["reproduce-paper", "--out", str(out), "--format", "json"]) == 0
        outputs.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
    same = outputs[0] == outputs[1] and bool(outputs[0])
    ACCEPTANCE[9] = (same, "byte-identical reproduce-paper reruns", time.perf_counter() - t0)
    print(f"{'PASS' if same else 'FAIL'} criterion 9: byte-identical reproduce-paper reruns")
    assert same
