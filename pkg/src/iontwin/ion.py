"""Optical response of a single 88Sr+ ion to the delivered light.

Each model maps a local intensity (W/m^2) to an observable: the qubit Rabi
frequency, a fluorescence count rate, a quench or shelving probability, or a
spectroscopy signal. Angular frequencies are in rad/s.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import atomic_mass, c, e, epsilon_0, fine_structure, h, hbar

from .errors import RatioOutOfRange


@dataclass(frozen=True)
class IonSpecies:
    mass: float = 88 * atomic_mass
    qubit_wavelength: float = 674e-9
    d52_lifetime: float = 0.390
    s_p_wavelength: float = 422e-9
    repump_wavelengths: tuple = (1092e-9, 1033e-9)
    shelve_proxy_wavelength: float = 408e-9
    quantizing_field: float = 4.3e-4  # tesla, normal to the chip
    p12_linewidth: float = 2 * math.pi * 21.5e6  # P1/2 natural linewidth, rad/s
    p12_d32_branching: float = 0.056

    def __post_init__(self):
        if not self.d52_lifetime > 0:
            raise ValueError("D5/2 lifetime must be positive")
        wls = (self.qubit_wavelength, self.s_p_wavelength, self.shelve_proxy_wavelength,
               *self.repump_wavelengths)
        if any(not w > 0 for w in wls):
            raise ValueError("wavelengths must be positive")


SR88 = IonSpecies()


# -- qubit drive -------------------------------------------------------------

@dataclass(frozen=True)
class RabiCalibration:
    reference_intensity: float
    reference_rabi: float
    transition: str = "S1/2(-1/2) -> D5/2(-5/2)"

    def __post_init__(self):
        if not (self.reference_intensity > 0 and self.reference_rabi > 0):
            raise ValueError("calibration intensity and Rabi frequency must be positive")

    @classmethod
    def from_pi_time(cls, reference_intensity, pi_time, **kwargs):
        return cls(reference_intensity, math.pi / pi_time, **kwargs)


def rabi_at(cal: RabiCalibration, intensity):
    """Rabi frequency at ``intensity``; scales as sqrt(I)."""
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise ValueError("intensity must be non-negative")
    out = cal.reference_rabi * np.sqrt(intensity / cal.reference_intensity)
    return float(out) if out.ndim == 0 else out


def pi_time(rabi):
    return math.pi / rabi if rabi > 0 else math.inf


def first_principles_rabi(species: IonSpecies, intensity, geometry_factor=1.0):
    """Electric-quadrupole Rabi frequency on S1/2 -> D5/2.

    The reduced matrix element follows from the D5/2 decay rate
    Gamma = 1/tau through the E2 emission rate; the Delta m = -2 Clebsch-Gordan
    weight and the best-case angular factor combine to the sqrt(5/2) below,
    giving Omega = (e E0 / 2 hbar) g sqrt(5/2) sqrt(Gamma / (alpha c k^3)).
    ``geometry_factor`` g in [0, 1] carries the unknown polarisation and
    k-vector orientation relative to the magnetic field.
    """
    if not 0 <= geometry_factor <= 1:
        raise ValueError("geometry_factor must lie in [0, 1]")
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise ValueError("intensity must be non-negative")
    k = 2 * math.pi / species.qubit_wavelength
    gamma = 1.0 / species.d52_lifetime
    e0 = np.sqrt(2 * intensity / (c * epsilon_0))
    out = (e * e0 / (2 * hbar)) * geometry_factor * math.sqrt(2.5) \
        * math.sqrt(gamma / (fine_structure * c * k**3))
    return float(out) if out.ndim == 0 else out


# -- fluorescence ------------------------------------------------------------

def saturation_intensity(wavelength, linewidth):
    """Two-level saturation intensity pi h c Gamma / (3 lambda^3)."""
    return math.pi * h * c * linewidth / (3 * wavelength**3)


@dataclass(frozen=True)
class FluorescenceParams:
    max_scatter_rate: float  # photons/s at full saturation
    i_sat_422: float
    i_sat_1092: float
    efficiency: float = 1.0  # collection x filter x detector

    @classmethod
    def for_species(cls, species: IonSpecies = SR88, efficiency=1.0):
        g = species.p12_linewidth
        return cls(g / 2,
                   saturation_intensity(species.s_p_wavelength, g),
                   saturation_intensity(species.repump_wavelengths[0], g * species.p12_d32_branching),
                   efficiency)


def _sat(s):
    return s / (1 + s)


def fluorescence_rate(i_422, i_1092, params: FluorescenceParams):
    """Detected counts/s from a separable two-beam saturation model."""
    i_422, i_1092 = np.asarray(i_422, dtype=float), np.asarray(i_1092, dtype=float)
    if np.any(i_422 < 0) or np.any(i_1092 < 0):
        raise ValueError("intensities must be non-negative")
    out = (params.efficiency * params.max_scatter_rate
           * _sat(i_422 / params.i_sat_422) * _sat(i_1092 / params.i_sat_1092))
    return float(out) if out.ndim == 0 else out


def calibrate_efficiency(params: FluorescenceParams, i_422, i_1092, target_rate):
    """Copy of ``params`` whose efficiency reproduces ``target_rate``."""
    raw = fluorescence_rate(i_422, i_1092, replace(params, efficiency=1.0))
    return replace(params, efficiency=target_rate / raw)


def invert_fluorescence(rate, other_saturation, params: FluorescenceParams, i_sat):
    """Intensity of the scanned beam given the count rate and the fixed
    saturation factor s/(1+s) of the partner beam."""
    f = np.asarray(rate, dtype=float) / (params.efficiency * params.max_scatter_rate * other_saturation)
    if np.any(f >= 1):
        raise ValueError("count rate exceeds the saturated maximum")
    return i_sat * f / (1 - f)


# -- dark-state probes -------------------------------------------------------

def quench_survival(intensity, duration, k_quench):
    """Probability the ion is still in D5/2 after a 1033 nm pulse."""
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0) or duration < 0 or k_quench < 0:
        raise ValueError("intensity, duration and k_quench must be non-negative")
    out = np.exp(-k_quench * intensity * duration)
    return float(out) if out.ndim == 0 else out


def quench_constant(peak_intensity, duration, target_survival=0.5):
    """k_quench giving ``target_survival`` at ``peak_intensity``."""
    return -math.log(target_survival) / (peak_intensity * duration)


@dataclass(frozen=True)
class ShelveParams:
    peak_intensity: float
    peak_probability: float = 0.40


def shelve_probability(intensity, params: ShelveParams):
    """Unsaturated shelving into D5/2 via P3/2, linear in the 408 nm intensity."""
    intensity = np.asarray(intensity, dtype=float)
    if np.any(intensity < 0):
        raise ValueError("intensity must be non-negative")
    out = np.clip(params.peak_probability * intensity / params.peak_intensity, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


# -- motion and spectroscopy -------------------------------------------------

def lamb_dicke(species: IonSpecies, mode_frequency, projection_cosine=1.0):
    if not mode_frequency > 0:
        raise ValueError("mode frequency must be positive")
    if abs(projection_cosine) > 1:
        raise ValueError("|projection_cosine| must be <= 1")
    k = 2 * math.pi / species.qubit_wavelength
    return abs(k * projection_cosine) * math.sqrt(hbar / (2 * species.mass * mode_frequency))


@dataclass(frozen=True)
class MotionalState:
    nbar: float
    mode_frequency: float
    lamb_dicke: float
    heating_rate: float = 640.0  # quanta/s

    def __post_init__(self):
        if self.nbar < 0:
            raise ValueError("nbar must be non-negative")
        if not 0 <= self.lamb_dicke < 1:
            raise ValueError("Lamb-Dicke parameter must lie in [0, 1)")


def heating_ledger(motional: MotionalState, wait_time):
    if wait_time < 0:
        raise ValueError("wait time must be non-negative")
    return motional.nbar + motional.heating_rate * wait_time


def thermal_populations(nbar, tail=1e-12):
    """P(n) of a thermal state, truncated once the remaining mass is below ``tail``."""
    if nbar == 0:
        return np.array([1.0])
    q = nbar / (nbar + 1)
    n_max = int(math.ceil(math.log(tail) / math.log(q)))
    n = np.arange(n_max + 1)
    return (1 - q) * q**n


def rabi_lineshape(detuning, rabi, t):
    """Excitation probability of a two-level Rabi pulse."""
    gen2 = rabi**2 + detuning**2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(gen2 > 0, rabi**2 / gen2 * np.sin(np.sqrt(gen2) * t / 2) ** 2, 0.0)
    return out


def spectrum(cal: RabiCalibration, motional: MotionalState, detuning_grid, probe_time,
             intensity=None):
    """Thermally averaged excitation versus detuning (rad/s).

    Carrier at 0 with Rabi frequency Omega; red and blue sidebands at -/+ the
    mode frequency with Omega eta sqrt(n) and Omega eta sqrt(n+1) (Lamb-Dicke
    regime). ``intensity`` defaults to the calibration reference.
    """
    if not probe_time > 0:
        raise ValueError("probe time must be positive")
    rabi = cal.reference_rabi if intensity is None else rabi_at(cal, intensity)
    d = np.asarray(detuning_grid, dtype=float)
    pn = thermal_populations(motional.nbar)
    n = np.arange(len(pn))[:, None]
    eta, w = motional.lamb_dicke, motional.mode_frequency
    lines = (rabi_lineshape(d, rabi, probe_time)
             + rabi_lineshape(d + w, rabi * eta * np.sqrt(n), probe_time)
             + rabi_lineshape(d - w, rabi * eta * np.sqrt(n + 1), probe_time))
    return np.clip(pn @ lines, 0.0, 1.0)


def sideband_peaks(detuning_grid, p_dark, mode_frequency, window=None):
    """Maximum excitation near the red and blue sideband positions."""
    d = np.asarray(detuning_grid, dtype=float)
    window = 0.25 * mode_frequency if window is None else window
    red = np.max(p_dark[np.abs(d + mode_frequency) <= window])
    blue = np.max(p_dark[np.abs(d - mode_frequency) <= window])
    return float(red), float(blue)


def nbar_from_sidebands(red_peak, blue_peak):
    """Thermal-state n from the sideband ratio r = red/blue: n = r/(1-r)."""
    if red_peak < 0 or blue_peak <= 0 or red_peak >= blue_peak:
        raise RatioOutOfRange(f"need 0 <= red < blue, got red={red_peak}, blue={blue_peak}")
    r = red_peak / blue_peak
    return r / (1 - r)
