"""Regenerate the shipped fixture scenario.

The electrode layout, grating layout and beam parameters are reconstructions:
gratings are designed to cross at the 55 um null, the fabricated index offset
is solved so that the 674/422 crossing sits at 65 um, the shared repumper
grating is placed so the 1092 and 1033 beams straddle the ion under that
offset, and each beam is then
shifted along y and its profiled waist rescaled so the axial cut at the ion
height reproduces the measured centre and diameter.

Run from the repository root:  python tools/build_fixture.py
"""
import json
import math
from pathlib import Path

import numpy as np

from iontwin import photonics, trap
from iontwin.beams import BeamField, calibrate_to_cut

UM, NM = 1e-6, 1e-9
HEIGHT = 55e-6
DESIGN_ANGLE = 40.0
CROSSING = 65e-6

OUT = Path(__file__).resolve().parents[1] / "src" / "iontwin" / "data" / "paper-2020-srplus.json"


def r(x, n=12):
    return float(f"{x:.{n}g}")


def main():
    stack = photonics.LayerStack()
    d = HEIGHT * math.tan(math.radians(DESIGN_ANGLE))
    target = (0.0, 0.0, HEIGHT)
    layout = {  # name: (design wavelength, position)
        "g_674": (674e-9, (0.0, d, 0.0)),
        "g_blue": (422e-9, (0.0, -d, 0.0)),
        "g_ir": (1092e-9, (d, 0.0, 0.0)),
        "g_461": (461e-9, (-d, 0.0, 0.0)),
    }
    gratings = {name: photonics.design_grating(stack, lam, pos, target, name=name)
                for name, (lam, pos) in layout.items()}
    dn = photonics.index_error_for_height(gratings["g_674"], gratings["g_blue"], 674e-9, 422e-9, CROSSING)
    targets = {name: target for name in gratings}

    # both repumpers leave g_ir; with the index offset they straddle x=0 only
    # if the grating is moved so their mean crossing point is the ion
    g = gratings["g_ir"]
    xs = []
    for lam in (1092e-9, 1033e-9):
        u = photonics.emission_direction(g, lam, index_error=dn)
        xs.append(g.position[0] + HEIGHT / u[2] * u[0])
    shift = -float(np.mean(xs))
    gratings["g_ir"] = photonics.design_grating(stack, 1092e-9, (d + shift, 0.0, 0.0),
                                                (shift, 0.0, HEIGHT), name="g_ir")
    targets["g_ir"] = (shift, 0.0, HEIGHT)

    # name: (wavelength, grating, channel, focused waist, unfocused waist, cut centre, cut diameter, cut axis)
    beam_specs = {
        "674": (674e-9, "g_674", "674", 2.5e-6, 5.5e-6, 13e-6, 13e-6, "unfocused"),
        "422": (422e-9, "g_blue", "422", 2.75e-6, 4.0e-6, -11e-6, 8.5e-6, "unfocused"),
        "408": (408e-9, "g_blue", "422", 2.75e-6, 5.0e-6, 11.4e-6, 11.3e-6, "unfocused"),
        "1092": (1092e-9, "g_ir", "1092", 2.75e-6, 5.5e-6, 0.0, 5.5e-6, "focused"),
        "1033": (1033e-9, "g_ir", "1092", 3.35e-6, 5.5e-6, 0.0, 6.7e-6, "focused"),
        "461": (461e-9, "g_461", "461", 2.75e-6, 5.5e-6, None, None, None),
    }
    beams = []
    for name, (lam, gname, channel, wf, wu, c, diam, axis) in beam_specs.items():
        g = gratings[gname]
        direction = photonics.emission_direction(g, lam, index_error=dn)
        s_ion = HEIGHT / direction[2]
        beam = BeamField(lam, 1.0, g.position, direction, wf, wu, s_ion, s_ion, name=name)
        entry = {}
        if c is not None:
            beam = calibrate_to_cut(beam, HEIGHT, c, diam, axis=axis)
            entry["cut"] = {"center_um": r(c / UM), "diameter_um": r(diam / UM), "axis": axis}
        beams.append({
            "name": name, "wavelength_nm": r(lam / NM), "channel": channel, "grating": gname,
            "origin_um": [r(v / UM) for v in beam.origin],
            "direction": [r(v, 15) for v in beam.direction],
            "waist_focused_um": r(beam.waist_focused / UM),
            "waist_unfocused_um": r(beam.waist_unfocused / UM),
            "focus_focused_um": r(beam.focus_focused / UM),
            "focus_unfocused_um": r(beam.focus_unfocused / UM),
            **entry,
        })

    model = trap.design_geometry(HEIGHT)
    electrodes = [{"name": p.name, "role": p.role, "x1_um": r(p.x1 / UM), "x2_um": r(p.x2 / UM),
                   "y1_um": r(p.y1 / UM), "y2_um": r(p.y2 / UM), "voltage_v": r(p.voltage)}
                  for p in model.patches]

    def ledger(occ, prop, grat, inferred=False):
        return [{"stage": "on_chip_coupling", "loss_db": occ},
                {"stage": "propagation", "loss_db": prop},
                {"stage": "grating", "loss_db": grat},
                {"stage": "fiber_feedthrough", "loss_db": 3, "inferred": inferred},
                {"stage": "cooldown", "loss_db": 7, "inferred": inferred}]

    scenario = {
        "schema_version": 1,
        "name": "paper-2020-srplus",
        "description": ("Photonics-integrated 88Sr+ surface trap. Loss ledgers, rates, lifetimes and "
                        "anchors are measured values; electrode, grating and beam geometry, fiber powers "
                        "other than 674 nm, and RF drive are reconstructions."),
        "seed": 2020,
        "channels": [
            {"label": "422", "wavelength_nm": 422, "fiber_power_mw": 1.0, "fiber_power_assumed": True,
             "waveguide_width_nm": 250, "grating": "g_blue", "losses": ledger(10, 3, 12)},
            {"label": "461", "wavelength_nm": 461, "fiber_power_mw": 1.0, "fiber_power_assumed": True,
             "waveguide_width_nm": 300, "grating": "g_461", "losses": ledger(11, 1.5, 9)},
            {"label": "674", "wavelength_nm": 674, "fiber_power_mw": 10.0, "waveguide_width_nm": 500,
             "grating": "g_674", "propagation_length_cm": 0.75, "propagation_rate_db_per_cm": 0.53,
             "losses": ledger(10, 0.4, 11)},
            {"label": "1092", "wavelength_nm": 1092, "fiber_power_mw": 1.0, "fiber_power_assumed": True,
             "waveguide_width_nm": 1100, "grating": "g_ir", "losses": ledger(6, 0.4, 10, inferred=True)},
        ],
        "stack": {"core_index": stack.core_index, "clad_index": stack.clad_index,
                  "core_thickness_nm": 100, "etch_depth_nm": 40, "reference_wavelength_nm": 633},
        "gratings": [
            {"name": g.name, "period_nm": r(g.period / NM), "n_eff_tooth": r(g.n_eff_tooth),
             "n_eff_gap": r(g.n_eff_gap), "duty_cycle": g.duty_cycle, "emitter_width_um": 18,
             "position_um": [r(v / UM) for v in g.position], "azimuth": [r(v) for v in g.azimuth],
             "design_wavelength_nm": r(g.design_wavelength / NM),
             "design_target_um": [r(v / UM) for v in targets[g.name]]}
            for g in gratings.values()],
        "fabrication_index_error": r(dn),
        "beams": beams,
        "trap": {"rf_frequency_mhz": 50, "ion_mass_u": 88, "ion_height_um": 55,
                 "axial_frequency_mhz": 1.3, "alternate_axial_frequency_mhz": 1.4,
                 "stray_field_v_per_m": [0, 0, 0], "electrodes": electrodes},
        "species": {"mass_u": 88, "qubit_wavelength_nm": 674, "d52_lifetime_ms": 390,
                    "s_p_wavelength_nm": 422, "repump_wavelengths_nm": [1092, 1033],
                    "shelve_proxy_wavelength_nm": 408, "quantizing_field_g": 4.3,
                    "p12_linewidth_mhz": 21.5, "p12_d32_branching": 0.056},
        "rabi": {"beam": "674", "pi_time_us": 6.5, "transition": "S1/2(-1/2) -> D5/2(-5/2)"},
        "motion": {"nbar": 0.5, "heating_rate_per_s": 640},
        "fluorescence": {"detected_rate_per_s": 4540, "beam_422": "422", "beam_1092": "1092",
                         "detection_position_um": [0, -5, 55]},
        "probes": {"scan_start_um": -35, "scan_stop_um": 35, "scan_step_um": 0.5,
                   "fluorescence_peak_saturation": 0.1, "free_space_saturation": 0.1,
                   "quench_pulse_us": 2.0, "quench_peak_survival": 0.5, "shelve_peak_probability": 0.4,
                   "targets": [{"probe": "rabi", "beam": "674"}, {"probe": "fluor", "beam": "422"},
                               {"probe": "fluor", "beam": "1092"}, {"probe": "quench", "beam": "1033"},
                               {"probe": "shelve", "beam": "408"}]},
        "detection": {"ion_rate_per_s": 4540, "background_rate_per_s": 967, "window_ms": 5,
                      "d_lifetime_ms": 390, "background_additive": False,
                      "window_sweep_ms": list(range(1, 21))},
        "vibration": {"frequency_hz": 67, "doppler_peak_khz": 9, "qubit_wavelength_nm": 674,
                      "baseline_coherence_us": 600, "delivery": "free_space"},
        "ramsey": {"phases": 8, "shots_per_point": 1000, "accelerations": 6},
    }
    OUT.write_text(json.dumps(scenario, indent=2) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
