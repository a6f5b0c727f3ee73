"""Command-line front end.

Every subcommand loads a scenario, computes one or more result tables and
writes them to ``--out`` as CSV or JSON (plus an SVG plot with ``--format
svg``). All results are computed before anything is written, so a failing
run leaves no partial output. Exit status: 0 success, 1 invalid scenario,
2 numerical failure, 3 missing optional dependency.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from . import __version__, beams, coherence, detection, insitu, ion, photonics, reproduce, trap
from .channels import delivered_power, ledger_rows, total_loss
from .errors import NumericalError, ScenarioError
from .scenario import Scenario, fixture_path, load

UM, NM = 1e-6, 1e-9
MHZ = 2 * math.pi * 1e6


@dataclass
class Table:
    name: str
    columns: list
    rows: list
    meta: dict = field(default_factory=dict)
    plot: tuple | None = None  # (x column, y column, group column or None)


class MissingDependency(Exception):
    pass


# -- value formatting --------------------------------------------------------

def _plain(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    return v


def _json_safe(v):
    v = _plain(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_json_safe(x) for x in v]
    return v


def _cell(v):
    v = _plain(v)
    if isinstance(v, float):
        return repr(v)  # locale-independent, round-trips exactly
    return str(v)


def header(scn: Scenario, seed):
    return {"tool": f"iontwin {__version__}", "scenario": scn.name, "sha256": scn.sha256, "seed": seed}


def header_line(h):
    return f"# {h['tool']} scenario={h['scenario']} sha256={h['sha256']} seed={h['seed']}"


def render_csv(table: Table, h):
    buf = io.StringIO()
    buf.write(header_line(h) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def render_json(table: Table, h):
    doc = {"header": h, **_json_safe(table.meta), "columns": table.columns,
           "rows": _json_safe([list(r) for r in table.rows])}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def render_svg(table: Table, h):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise MissingDependency("SVG output needs matplotlib (pip install 'artifact[plot]')") from exc
    matplotlib.rcParams["svg.hashsalt"] = "iontwin"
    xcol, ycol, gcol = table.plot
    ix, iy = table.columns.index(xcol), table.columns.index(ycol)
    groups = {}
    ig = table.columns.index(gcol) if gcol else None
    for row in table.rows:
        groups.setdefault(row[ig] if ig is not None else "", []).append((row[ix], row[iy]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, pts in groups.items():
        x, y = zip(*pts)
        ax.plot(x, y, marker="." if len(pts) < 60 else None, label=str(label) if label != "" else None)
    ax.set_xlabel(xcol)
    ax.set_ylabel(ycol)
    if ig is not None:
        ax.legend(fontsize=7)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    text = buf.getvalue()
    # header as an XML comment after the declaration line
    first, rest = text.split("\n", 1)
    return f"{first}\n<!-- {header_line(h)[2:]} -->\n{rest}"


def render(tables, fmt, h):
    """``{filename: text}`` for every table."""
    files = {}
    for t in tables:
        if fmt == "json":
            files[f"{t.name}.json"] = render_json(t, h)
        else:
            files[f"{t.name}.csv"] = render_csv(t, h)
            if fmt == "svg" and t.plot:
                files[f"{t.name}.svg"] = render_svg(t, h)
    return files


def write_atomic(path: Path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- subcommands ------------------------------------------------------------

def cmd_loss(scn, args):
    rows, totals, delivered = [], {}, {}
    for label, ch in scn.channels.items():
        for stage, loss, prov in ledger_rows(ch):
            rows.append([label, ch.wavelength / NM, stage, loss, prov])
        totals[label] = total_loss(ch)
        delivered[label] = delivered_power(ch) / UM
    return [Table("loss", ["channel", "wavelength_nm", "stage", "loss_db", "provenance"], rows,
                  {"total_db": totals, "delivered_uw": delivered})]


def _beam_grating(scn, beam_name):
    g = scn.beam_gratings[beam_name]
    return scn.gratings[g] if g else None


def cmd_grating_design(scn, args):
    rows = []
    for name, g in scn.gratings.items():
        raw = next(x for x in scn.raw["gratings"] if x["name"] == name)
        target = np.asarray(raw.get("design_target_um", (0, 0, scn.ion_height / UM))) * UM
        lam = g.design_wavelength
        if lam is None:
            continue
        redesigned = photonics.design_grating(scn.stack, lam, g.position, target, g.duty_cycle)
        angle = photonics.emission_angle(g, lam)
        rows.append([name, lam / NM, g.period / NM, redesigned.period / NM, g.n_eff_tooth, g.n_eff_gap,
                     g.n_eff_grating, angle])
    return [Table("grating-design", ["grating", "design_wavelength_nm", "period_nm", "redesigned_period_nm",
                                     "n_eff_tooth", "n_eff_gap", "n_eff_grating", "design_angle_deg"], rows)]


def cmd_grating_angle(scn, args):
    rows = []
    for name in scn.beams:
        g = _beam_grating(scn, name)
        if g is None:
            continue
        lam = scn.beams[name].wavelength
        rows.append([name, g.name, lam / NM, photonics.emission_angle(g, lam),
                     photonics.emission_angle(g, lam, index_error=scn.index_error)])
    return [Table("grating-angle", ["beam", "grating", "wavelength_nm", "nominal_angle_deg",
                                    "fabricated_angle_deg"], rows, {"index_error": scn.index_error})]


def cmd_grating_orders(scn, args):
    rows = []
    for name in scn.beams:
        g = _beam_grating(scn, name)
        if g is None:
            continue
        lam = scn.beams[name].wavelength
        for m, a in photonics.diffraction_orders(g, lam, scn.index_error):
            rows.append([name, g.name, lam / NM, m, a])
    return [Table("grating-orders", ["beam", "grating", "wavelength_nm", "order", "angle_deg"], rows,
                  {"index_error": scn.index_error})]


def cmd_grating_intersect(scn, args):
    rows = []
    named = [(n, _beam_grating(scn, n)) for n in scn.beams]
    named = [(n, g) for n, g in named if g is not None]
    for (a, ga), (b, gb) in combinations(named, 2):
        if ga.name == gb.name:
            continue
        la, lb = scn.beams[a].wavelength, scn.beams[b].wavelength
        try:
            nom = photonics.intersection_height(ga, gb, la, lb)
            fab = photonics.intersection_height(ga, gb, la, lb, scn.index_error)
        except NumericalError:
            continue
        rows.append([a, b, nom.height / UM, nom.miss_distance / UM, fab.height / UM, fab.miss_distance / UM,
                     nom.dz_dn / UM])
    return [Table("grating-intersect", ["beam_a", "beam_b", "nominal_height_um", "nominal_miss_um",
                                        "fabricated_height_um", "fabricated_miss_um", "dz_dn_um"],
                  rows, {"index_error": scn.index_error})]


def _selected_beams(scn, args):
    names = [args.beam] if getattr(args, "beam", None) else list(scn.beams)
    for n in names:
        if n not in scn.beams:
            raise ScenarioError(f"no beam named {n!r}", "beams")
    return names


def cmd_beam_profile(scn, args):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([args.seed, 3])))
    rows, stack_rows = [], []
    for name in _selected_beams(scn, args):
        b = scn.beams[name]
        c = b.point_at_height(scn.ion_height)
        stack = beams.synthesize_stack(b, half_width=60e-6, center=(c[0], c[1]))
        if args.noise:
            stack = beams.add_noise(stack, args.noise, rng)
        if args.stack:
            for z, img in zip(stack.heights, stack.slices):
                stack_rows += [[name, z / UM, yi / UM, xi / UM, v]
                               for yi, line in zip(stack.y, img) for xi, v in zip(stack.x, line)]
        e = beams.reconstruct_beam(stack)
        rows.append([name, b.angle_deg, e.angle_deg, b.waist_focused / UM, e.waist_focused / UM,
                     b.waist_unfocused / UM, e.waist_unfocused / UM, e.focus_height("focused") / UM,
                     e.focus_height("unfocused") / UM])
    tables = [Table("beam-profile", ["beam", "angle_deg", "fit_angle_deg", "waist_focused_um",
                                     "fit_waist_focused_um", "waist_unfocused_um", "fit_waist_unfocused_um",
                                     "fit_focus_height_focused_um", "fit_focus_height_unfocused_um"], rows,
                    {"noise": args.noise})]
    if args.stack:
        tables.append(Table("beam-stack", ["beam", "z_um", "y_um", "x_um", "intensity_w_per_m2"], stack_rows))
    return tables


def cmd_beam_cut(scn, args):
    rows, fits = [], {}
    for name in _selected_beams(scn, args):
        cut = beams.axial_cut(scn.beams[name], scn.ion_height)
        fits[name] = {"center_um": cut.fit.center / UM, "diameter_um": cut.fit.diameter / UM}
        rows += [[name, y / UM, i] for y, i in zip(cut.y, cut.intensity)]
    return [Table("beam-cut", ["beam", "y_um", "intensity_w_per_m2"], rows,
                  {"height_um": scn.ion_height / UM, "fits": fits}, plot=("y_um", "intensity_w_per_m2", "beam"))]


def cmd_trap_null(scn, args):
    y = scn.scan_y
    nulls = trap.find_null(scn.trap, y)
    rows = [[yi / UM, p[0] / UM, p[2] / UM] for yi, p in zip(y, nulls)]
    return [Table("trap-null", ["y_um", "x_um", "z_um"], rows, plot=("y_um", "z_um", None))]


def _well_row(w):
    return [w.target[1] / UM, w.position[0] / UM, w.position[2] / UM,
            *(w.secular_frequencies / (2 * math.pi))]


def cmd_trap_freqs(scn, args):
    targets = [scn.axial_frequency] + ([scn.alternate_axial_frequency] if scn.alternate_axial_frequency else [])
    rows = []
    for f in targets:
        w = trap.solve_axial_well(scn.trap, 0.0, f)
        rows.append([f / MHZ, *_well_row(w)[1:], w.residual, w.condition_number,
                     *(w.dc_voltages[n] for n in scn.trap.dc_names)])
    return [Table("trap-freqs", ["target_axial_mhz", "x_um", "z_um", "wx_hz", "wy_hz", "wz_hz", "residual",
                                 "condition_number", *(f"V_{n}" for n in scn.trap.dc_names)], rows)]


def cmd_trap_shuttle(scn, args):
    wells = trap.shuttle_scan(scn.trap, scn.scan_y, scn.axial_frequency)
    rows = [[*_well_row(w), *(w.dc_voltages[n] for n in scn.trap.dc_names)] for w in wells]
    return [Table("trap-shuttle", ["y_um", "x_um", "z_um", "wx_hz", "wy_hz", "wz_hz",
                                   *(f"V_{n}" for n in scn.trap.dc_names)], rows,
                  {"axial_frequency_mhz": scn.axial_frequency / MHZ}, plot=("y_um", "wy_hz", None))]


def cmd_scan_profile_ion(scn, args):
    targets = [(k, b) for k, b in scn.probe_targets
               if args.probe in ("all", k) and (args.beam is None or args.beam == b)]
    if not targets:
        raise ScenarioError(f"no probe target matches probe={args.probe!r} beam={args.beam!r}", "probes/targets")
    pos = insitu.scan_positions(scn.trap, scn.scan_y, scn.axial_frequency)
    rows, fits = [], {}
    for kind, name in targets:
        r = insitu.profile_ion(scn.beams[name], scn.probe(kind, name), pos)
        fits[f"{kind}/{name}"] = {"center_um": r.fit.center / UM, "diameter_um": r.fit.diameter / UM,
                                  "cut_center_um": r.cut.center / UM, "cut_diameter_um": r.cut.diameter / UM}
        peak = r.intensity.max()
        rows += [[f"{kind}/{name}", p[1] / UM, p[2] / UM, s, i, i / peak]
                 for p, s, i in zip(pos, r.signal, r.intensity)]
    return [Table("scan-profile-ion", ["target", "y_um", "z_um", "signal", "intensity_w_per_m2", "relative"],
                  rows, {"fits": fits}, plot=("y_um", "relative", "target"))]


def cmd_spectrum(scn, args):
    cal, m = scn.rabi_calibration, scn.motional_state
    if args.nbar is not None:
        m = ion.MotionalState(args.nbar, m.mode_frequency, m.lamb_dicke, m.heating_rate)
    intensity, t = reproduce.spectroscopy_probe(scn)
    d = reproduce.detuning_grid(scn)
    p = ion.spectrum(cal, m, d, t, intensity)
    red, blue = ion.sideband_peaks(d, p, m.mode_frequency)
    meta = {"nbar": m.nbar, "lamb_dicke": m.lamb_dicke, "probe_time_us": t / UM,
            "red_peak": red, "blue_peak": blue}
    try:
        meta["nbar_estimate"] = ion.nbar_from_sidebands(red, blue)
    except NumericalError:
        meta["nbar_estimate"] = math.nan
    rows = [[di / (2 * math.pi), pi] for di, pi in zip(d, p)]
    return [Table("spectrum", ["detuning_hz", "p_dark"], rows, meta, plot=("detuning_hz", "p_dark", None))]


def cmd_detect_fidelity(scn, args):
    model = scn.detection if args.window_ms is None else scn.detection.with_window(args.window_ms * 1e-3)
    res = detection.model_fidelity(model)
    windows = scn.window_sweep or [model.window]
    rows = []
    for T in windows:
        r = detection.model_fidelity(model.with_window(T))
        rows.append([T * 1e3, r.mean_fidelity, r.threshold, r.eps_d, r.eps_b])
    best = max(rows, key=lambda r: r[1])[0]
    meta = {"window_ms": model.window * 1e3, "fidelity": res.mean_fidelity, "threshold": res.threshold,
            "eps_d": res.eps_d, "eps_b": res.eps_b, "best_window_ms": best}
    bright, dark = detection.bright_histogram(model), detection.dark_histogram_with_decay(model)
    n = max(bright.support, dark.support)
    hist = [[k, pb, pd] for k, (pb, pd) in enumerate(zip(bright.padded(n), dark.padded(n)))]
    return [Table("detect-fidelity", ["window_ms", "fidelity", "threshold", "eps_d", "eps_b"], rows, meta,
                  plot=("window_ms", "fidelity", None)),
            Table("detect-histogram", ["k", "p_bright", "p_dark"], hist, plot=("k", "p_dark", None))]


def cmd_ramsey_sweep(scn, args):
    shots = args.shots or scn.ramsey_shots
    accs = scn.ramsey_accelerations
    sweep = coherence.vibration_sweep(scn.vibration, accs, scn.ramsey_delays, scn.ramsey_phases, shots, args.seed)
    contrast, taus = [], []
    for delivery, results in sweep.items():
        for a, r in zip(accs, results):
            taus.append([a, r.fitted_tau / UM, r.tau_error / UM, delivery])
            contrast += [[f"{delivery} a={a:.3f}", delivery, a, T / UM, c, e]
                         for T, c, e in zip(r.delays, r.contrasts, r.contrast_errors)]
    bound = coherence.suppression_bound(accs, sweep[coherence.FREE_SPACE], sweep[coherence.INTEGRATED])
    meta = {"shots_per_point": shots, "phases": scn.ramsey_phases, "suppression_bound": bound}
    return [Table("ramsey-tau", ["acceleration_m_s2", "tau_us", "tau_err_us", "delivery"], taus, meta,
                  plot=("acceleration_m_s2", "tau_us", "delivery")),
            Table("ramsey-contrast", ["series", "delivery", "acceleration_m_s2", "delay_us", "contrast",
                                      "contrast_err"], contrast, plot=("delay_us", "contrast", "series"))]


def cmd_reproduce(scn, args):
    checks = reproduce.run(scn, args.seed, args.mc_shots)
    failed = [c for c in checks if not c.passed]
    meta = {"checks": len(checks), "failed": len(failed)}
    return [Table("reproduce-paper", reproduce.COLUMNS, [c.row() for c in checks], meta)]


# -- argument parsing -------------------------------------------------------

def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("scenario_path", nargs="?", metavar="SCENARIO", help="scenario JSON (default: shipped fixture)")
    p.add_argument("--scenario", dest="scenario_opt", metavar="PATH", help="scenario JSON")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: scenario seed)")
    p.add_argument("--format", choices=["csv", "json", "svg"], default="csv")
    return p


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="iontwin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"iontwin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def leaf(subparsers, name, func, help_):
        p = subparsers.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    def group(name, help_):
        p = sub.add_parser(name, help=help_)
        return p.add_subparsers(dest="action", required=True)

    leaf(sub, "loss", cmd_loss, "per-channel loss ledgers and delivered power")
    g = group("grating", "grating coupler design and emission")
    leaf(g, "design", cmd_grating_design, "periods and indices of the scenario gratings")
    leaf(g, "angle", cmd_grating_angle, "emission angle per beam, nominal and fabricated")
    leaf(g, "orders", cmd_grating_orders, "propagating diffraction orders")
    leaf(g, "intersect", cmd_grating_intersect, "crossing heights of beam pairs")
    g = group("beam", "beam fields above the chip")
    p = leaf(g, "profile", cmd_beam_profile, "focal-stack reconstruction of each beam")
    p.add_argument("--beam")
    p.add_argument("--noise", type=float, default=0.0, help="relative camera noise")
    p.add_argument("--stack", action="store_true", help="also write the synthesized focal stack")
    p = leaf(g, "cut", cmd_beam_cut, "intensity along the trap axis at the ion height")
    p.add_argument("--beam")
    g = group("trap", "trap electrostatics")
    leaf(g, "null", cmd_trap_null, "RF null along the scan range")
    leaf(g, "freqs", cmd_trap_freqs, "secular frequencies of the solved well")
    leaf(g, "shuttle", cmd_trap_shuttle, "solved wells along the scan range")
    g = group("scan", "ion-based measurements")
    p = leaf(g, "profile-ion", cmd_scan_profile_ion, "beam profiles measured by shuttling the ion")
    p.add_argument("--probe", choices=["all", "rabi", "fluor", "quench", "shelve"], default="all")
    p.add_argument("--beam")
    p = leaf(sub, "spectrum", cmd_spectrum, "resolved-sideband spectrum")
    p.add_argument("--nbar", type=float)
    g = group("detect", "state detection")
    p = leaf(g, "fidelity", cmd_detect_fidelity, "threshold discrimination fidelity")
    p.add_argument("--window-ms", type=float)
    g = group("ramsey", "qubit coherence under vibration")
    p = leaf(g, "sweep", cmd_ramsey_sweep, "Ramsey decay versus vibration amplitude")
    p.add_argument("--shots", type=int, help="shots per (delay, phase)")
    p = leaf(sub, "reproduce-paper", cmd_reproduce, "evaluate every published anchor")
    p.add_argument("--mc-shots", type=int, default=10_000_000, help=argparse.SUPPRESS)
    return parser


def _scenario_path(args):
    path = args.scenario_opt or args.scenario_path
    if path is None:
        return None
    p = Path(path)
    if not p.exists() and p.name == fixture_path().name:
        return fixture_path()
    return p


def _summary(tables):
    for t in tables:
        for k, v in t.meta.items():
            if isinstance(v, dict):
                for sub, x in v.items():
                    if not isinstance(x, (dict, list)):
                        print(f"{t.name}: {k}[{sub}] = {_cell(x)}")
            elif not isinstance(v, list):
                print(f"{t.name}: {k} = {_cell(v)}")
        if t.name == "reproduce-paper":
            for r in t.rows:
                print(f"[{r[-1]}] {r[0]}: {r[1]} = {_cell(r[2])}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        scn = load(_scenario_path(args))
        if args.seed is None:
            args.seed = scn.seed
        tables = args.func(scn, args)
        files = render(tables, args.format, header(scn, args.seed))
    except ScenarioError as exc:
        print(f"iontwin: invalid scenario: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"iontwin: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except MissingDependency as exc:
        print(f"iontwin: {exc}", file=sys.stderr)
        return 3
    out = Path(args.out)
    for name, text in files.items():
        write_atomic(out / name, text)
    _summary(tables)
    for name in files:
        print(f"wrote {out / name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
