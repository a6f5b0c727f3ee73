"""Scenario files: JSON with unit-suffixed keys, validated against a schema
and turned into model objects (SI units internally)."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from scipy.constants import atomic_mass

from . import coherence, detection, ion
from .beams import BeamField, intensity_at
from .channels import LossEntry, LossLedger, OpticalChannel, delivered_power
from .errors import ScenarioError
from .insitu import FluorescenceProbe, QuenchProbe, RabiProbe, ShelveProbe, peak_on_line
from .photonics import GratingSpec, LayerStack
from .trap import ElectrodePatch, TrapModel

FIXTURE_NAME = "paper-2020-srplus"
UM, NM = 1e-6, 1e-9


def schema():
    return json.loads(resources.files("iontwin.data").joinpath("scenario.schema.json").read_text())


def fixture_path() -> Path:
    return Path(str(resources.files("iontwin.data").joinpath(f"{FIXTURE_NAME}.json")))


def _path(err):
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate(raw):
    """Raise :class:`ScenarioError` naming the first offending key."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ScenarioError(errors[0].message, _path(errors[0]))
    _check_references(raw)


def _check_references(raw):
    def unique(items, key, where):
        names = [it[key] for it in items]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise ScenarioError(f"duplicate name(s) {sorted(dup)}", where)
        return set(names)

    gratings = unique(raw["gratings"], "name", "gratings")
    channels = unique(raw["channels"], "label", "channels")
    beams = unique(raw["beams"], "name", "beams")
    unique(raw["trap"]["electrodes"], "name", "trap/electrodes")
    for i, ch in enumerate(raw["channels"]):
        if "grating" in ch and ch["grating"] not in gratings:
            raise ScenarioError(f"unknown grating {ch['grating']!r}", f"channels/{i}/grating")
    for i, b in enumerate(raw["beams"]):
        if b["channel"] not in channels:
            raise ScenarioError(f"unknown channel {b['channel']!r}", f"beams/{i}/channel")
        if "grating" in b and b["grating"] not in gratings:
            raise ScenarioError(f"unknown grating {b['grating']!r}", f"beams/{i}/grating")
    for key in ("beam_422", "beam_1092"):
        if raw["fluorescence"][key] not in beams:
            raise ScenarioError(f"unknown beam {raw['fluorescence'][key]!r}", f"fluorescence/{key}")
    if raw["rabi"]["beam"] not in beams:
        raise ScenarioError(f"unknown beam {raw['rabi']['beam']!r}", "rabi/beam")
    for i, t in enumerate(raw["probes"]["targets"]):
        if t["beam"] not in beams:
            raise ScenarioError(f"unknown beam {t['beam']!r}", f"probes/targets/{i}/beam")
    for i, e in enumerate(raw["trap"]["electrodes"]):
        if not (e["x1_um"] < e["x2_um"] and e["y1_um"] < e["y2_um"]):
            raise ScenarioError("need x1 < x2 and y1 < y2", f"trap/electrodes/{i}")


def load(path=None) -> "Scenario":
    path = fixture_path() if path is None else Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}", str(path)) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc}", str(path)) from exc
    return from_dict(raw, sha256=hashlib.sha256(text.encode()).hexdigest())


def from_dict(raw, sha256=None) -> "Scenario":
    validate(raw)
    try:
        return Scenario(raw, sha256 or hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest())
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def _channel(d):
    entries = [LossEntry(e["stage"], float(e["loss_db"]), e.get("inferred", False)) for e in d["losses"]]
    ledger = LossLedger(entries, d.get("propagation_length_cm"), d.get("propagation_rate_db_per_cm"))
    return OpticalChannel(d["label"], d["wavelength_nm"] * NM, d["fiber_power_mw"] * 1e-3,
                          d["waveguide_width_nm"] * NM, ledger, d.get("grating"))


def _grating(d):
    return GratingSpec(period=d["period_nm"] * NM, n_eff_tooth=d["n_eff_tooth"], n_eff_gap=d["n_eff_gap"],
                       duty_cycle=d.get("duty_cycle", 0.5),
                       emitter_width=d.get("emitter_width_um", 18.0) * UM,
                       position=tuple(np.asarray(d["position_um"]) * UM), azimuth=tuple(d["azimuth"]),
                       design_wavelength=d["design_wavelength_nm"] * NM if "design_wavelength_nm" in d else None,
                       name=d["name"])


@dataclass
class Scenario:
    raw: dict
    sha256: str

    def __post_init__(self):
        r = self.raw
        self.name = r["name"]
        self.seed = int(r["seed"])
        s = r["stack"]
        self.stack = LayerStack(s["core_index"], s["clad_index"], s["core_thickness_nm"] * NM,
                                s["etch_depth_nm"] * NM, s.get("reference_wavelength_nm", 633) * NM,
                                s.get("core_dispersion_per_um", 0.0), s.get("clad_dispersion_per_um", 0.0))
        self.gratings = {g["name"]: _grating(g) for g in r["gratings"]}
        self.index_error = float(r.get("fabrication_index_error", 0.0))
        self.channels = {c["label"]: _channel(c) for c in r["channels"]}
        self.beams = {}
        self.cuts = {}
        self.beam_gratings = {b["name"]: b.get("grating") for b in r["beams"]}
        for b in r["beams"]:
            power = delivered_power(self.channels[b["channel"]])
            self.beams[b["name"]] = BeamField(
                b["wavelength_nm"] * NM, power, tuple(np.asarray(b["origin_um"]) * UM), tuple(b["direction"]),
                b["waist_focused_um"] * UM, b["waist_unfocused_um"] * UM,
                b["focus_focused_um"] * UM, b["focus_unfocused_um"] * UM, name=b["name"])
            if "cut" in b:
                self.cuts[b["name"]] = b["cut"]
        t = r["trap"]
        patches = [ElectrodePatch(e["name"], e["x1_um"] * UM, e["x2_um"] * UM, e["y1_um"] * UM,
                                  e["y2_um"] * UM, e["role"], e.get("voltage_v", 0.0))
                   for e in t["electrodes"]]
        self.ion_height = t["ion_height_um"] * UM
        self.trap = TrapModel(patches, 2 * math.pi * t["rf_frequency_mhz"] * 1e6,
                              ion_mass=t.get("ion_mass_u", 88) * atomic_mass,
                              stray_field=tuple(t.get("stray_field_v_per_m", (0.0, 0.0, 0.0))),
                              length_scale=self.ion_height)
        self.axial_frequency = 2 * math.pi * t["axial_frequency_mhz"] * 1e6
        alt = t.get("alternate_axial_frequency_mhz")
        self.alternate_axial_frequency = 2 * math.pi * alt * 1e6 if alt else None
        sp = r["species"]
        self.species = ion.IonSpecies(
            mass=sp["mass_u"] * atomic_mass, qubit_wavelength=sp["qubit_wavelength_nm"] * NM,
            d52_lifetime=sp["d52_lifetime_ms"] * 1e-3,
            s_p_wavelength=sp.get("s_p_wavelength_nm", 422) * NM,
            repump_wavelengths=tuple(w * NM for w in sp.get("repump_wavelengths_nm", (1092, 1033))),
            shelve_proxy_wavelength=sp.get("shelve_proxy_wavelength_nm", 408) * NM,
            quantizing_field=sp.get("quantizing_field_g", 4.3) * 1e-4,
            p12_linewidth=2 * math.pi * sp.get("p12_linewidth_mhz", 21.5) * 1e6,
            p12_d32_branching=sp.get("p12_d32_branching", 0.056))
        d = r["detection"]
        self.detection = detection.DetectionModel(
            d["ion_rate_per_s"], d["background_rate_per_s"], d["window_ms"] * 1e-3,
            d["d_lifetime_ms"] * 1e-3, d.get("background_additive", True))
        self.window_sweep = [w * 1e-3 for w in d.get("window_sweep_ms", [])]
        v = r["vibration"]
        w_v = 2 * math.pi * v["frequency_hz"]
        lam = v["qubit_wavelength_nm"] * NM
        self.vibration = coherence.VibrationScenario(
            coherence.amplitude_for_doppler(v["doppler_peak_khz"] * 1e3, w_v, lam), w_v,
            v.get("delivery", coherence.FREE_SPACE), lam, v["baseline_coherence_us"] * 1e-6)
        rm = r["ramsey"]
        self.ramsey_phases = rm["phases"]
        self.ramsey_shots = rm["shots_per_point"]
        self.ramsey_accelerations = coherence.fixture_accelerations(self.vibration.peak_acceleration,
                                                                     rm["accelerations"])
        self.ramsey_delays = (np.asarray(rm["delays_us"]) * 1e-6 if "delays_us" in rm
                              else coherence.default_delays())

    # -- derived models ------------------------------------------------------

    def delivered_power(self, label):
        return delivered_power(self.channels[label])

    @cached_property
    def rabi_beam(self) -> BeamField:
        return self.beams[self.raw["rabi"]["beam"]]

    @cached_property
    def rabi_calibration(self) -> ion.RabiCalibration:
        """pi time anchored at the qubit beam's peak intensity on the trap axis."""
        i_ref = peak_on_line(self.rabi_beam, self.ion_height)
        return ion.RabiCalibration.from_pi_time(
            i_ref, self.raw["rabi"]["pi_time_us"] * 1e-6,
            transition=self.raw["rabi"].get("transition", "S1/2(-1/2) -> D5/2(-5/2)"))

    @cached_property
    def motional_state(self) -> ion.MotionalState:
        # axial mode is along y: project the qubit k-vector onto it
        cos_y = abs(self.rabi_beam.direction[1])
        m = self.raw["motion"]
        return ion.MotionalState(m["nbar"], self.axial_frequency,
                                 ion.lamb_dicke(self.species, self.axial_frequency, cos_y),
                                 m["heating_rate_per_s"])

    @cached_property
    def fluorescence_params(self) -> ion.FluorescenceParams:
        """Saturation model with the collection efficiency set to give the
        detected bright rate at the detection position."""
        f = self.raw["fluorescence"]
        pos = np.asarray(f.get("detection_position_um", (0.0, 0.0, self.ion_height / UM))) * UM
        i422 = intensity_at(self.beams[f["beam_422"]], pos)
        i1092 = intensity_at(self.beams[f["beam_1092"]], pos)
        base = ion.FluorescenceParams.for_species(self.species)
        return ion.calibrate_efficiency(base, i422, i1092, f["detected_rate_per_s"])

    def probe(self, kind, beam_name):
        p = self.raw["probes"]
        beam = self.beams[beam_name]
        peak = peak_on_line(beam, self.ion_height)
        if kind == "rabi":
            return RabiProbe(self.rabi_calibration)
        if kind == "fluor":
            scanned = "1092" if abs(beam.wavelength - 1092e-9) < 20e-9 else "422"
            return FluorescenceProbe(self.fluorescence_params, scanned, peak,
                                     p.get("fluorescence_peak_saturation", 0.1),
                                     p.get("free_space_saturation", 0.1))
        if kind == "quench":
            t = p.get("quench_pulse_us", 2.0) * 1e-6
            return QuenchProbe(ion.quench_constant(peak, t, p.get("quench_peak_survival", 0.5)), t)
        if kind == "shelve":
            return ShelveProbe(ion.ShelveParams(peak, p.get("shelve_peak_probability", 0.4)))
        raise ScenarioError(f"unknown probe {kind!r}", "probes")

    @property
    def probe_targets(self):
        return [(t["probe"], t["beam"]) for t in self.raw["probes"]["targets"]]

    @property
    def scan_y(self):
        p = self.raw["probes"]
        n = int(round((p["scan_stop_um"] - p["scan_start_um"]) / p["scan_step_um"])) + 1
        return np.linspace(p["scan_start_um"], p["scan_stop_um"], n) * UM
