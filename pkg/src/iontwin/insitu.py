"""Beam profiling with the ion as the sensor.

The ion is shuttled along the trap axis through a beam; at every well
position a response model turns the local intensity into a signal (Rabi
frequency, fluorescence, quench or shelving probability). Inverting the
response recovers the relative intensity, and a Gaussian fit gives the beam
centre and 1/e^2 diameter along y.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ion
from .beams import BeamField, ProfileFit, axial_cut, fit_profile, intensity_at
from .trap import TrapModel, shuttle_scan


@dataclass(frozen=True)
class RabiProbe:
    calibration: ion.RabiCalibration
    name: str = "rabi"

    def signal(self, intensity):
        return ion.rabi_at(self.calibration, intensity)

    def invert(self, signal):
        cal = self.calibration
        return cal.reference_intensity * (np.asarray(signal) / cal.reference_rabi) ** 2


@dataclass(frozen=True)
class FluorescenceProbe:
    """Scanned beam (422 or 1092 nm) attenuated to ``peak_saturation`` at its
    maximum, partner beam from free space at uniform ``partner_saturation``."""

    params: ion.FluorescenceParams
    scanned: str  # "422" or "1092"
    peak_intensity: float
    peak_saturation: float = 0.1
    partner_saturation: float = 0.1
    name: str = "fluor"

    @property
    def _i_sat(self):
        return self.params.i_sat_422 if self.scanned == "422" else self.params.i_sat_1092

    @property
    def attenuation(self):
        return self.peak_saturation * self._i_sat / self.peak_intensity

    def signal(self, intensity):
        scanned = np.asarray(intensity) * self.attenuation
        partner = self.partner_saturation * (self.params.i_sat_1092 if self.scanned == "422"
                                             else self.params.i_sat_422)
        if self.scanned == "422":
            return ion.fluorescence_rate(scanned, partner, self.params)
        return ion.fluorescence_rate(partner, scanned, self.params)

    def invert(self, signal):
        s = self.partner_saturation
        scanned = ion.invert_fluorescence(signal, s / (1 + s), self.params, self._i_sat)
        return scanned / self.attenuation


@dataclass(frozen=True)
class QuenchProbe:
    k_quench: float
    duration: float
    name: str = "quench"

    def signal(self, intensity):
        """Probability the ion is still dark after the pulse."""
        return ion.quench_survival(intensity, self.duration, self.k_quench)

    def invert(self, signal):
        return -np.log(np.asarray(signal)) / (self.k_quench * self.duration)


@dataclass(frozen=True)
class ShelveProbe:
    params: ion.ShelveParams
    name: str = "shelve"

    def signal(self, intensity):
        return ion.shelve_probability(intensity, self.params)

    def invert(self, signal):
        return np.asarray(signal) * self.params.peak_intensity / self.params.peak_probability


@dataclass(frozen=True)
class ProfileResult:
    probe: str
    beam: str
    positions: np.ndarray  # (N, 3) well positions
    signal: np.ndarray
    intensity: np.ndarray  # inverted
    fit: ProfileFit
    cut: ProfileFit  # direct axial cut at the mean ion height

    @property
    def center_error(self):
        return self.fit.center - self.cut.center

    @property
    def diameter_ratio(self):
        return self.fit.diameter / self.cut.diameter


def scan_positions(trap: TrapModel, y_values, axial_frequency):
    """Ion positions along a shuttle scan."""
    return np.array([w.position for w in shuttle_scan(trap, y_values, axial_frequency)])


def profile_ion(beam: BeamField, probe, positions, cut_y=None) -> ProfileResult:
    positions = np.asarray(positions, dtype=float)
    sig = probe.signal(intensity_at(beam, positions))
    inten = probe.invert(sig)
    fit = fit_profile(positions[:, 1], inten)
    height = float(np.mean(positions[:, 2]))
    x = float(np.mean(positions[:, 0]))
    cut = axial_cut(beam, height, cut_y, x=x).fit
    return ProfileResult(probe.name, beam.name, positions, np.asarray(sig), np.asarray(inten), fit, cut)


def peak_on_line(beam: BeamField, height, x=0.0, y=None):
    """Largest intensity of ``beam`` along the trap axis at ``height``."""
    c = axial_cut(beam, height, y, x)
    return float(intensity_at(beam, np.array([x, c.fit.center, height])))
