"""Waveguide modes and grating-coupler emission geometry.

Mode indices come from the symmetric three-layer slab and the
effective-index method (thickness first, then width). Grating emission
follows first-order phase matching,

    n_eff - m * wavelength / period = sin(theta_vacuum),

where the cladding refraction cancels out of the vacuum angle. Angles are
measured from the chip normal, positive toward the guided propagation
direction (forward emission). All lengths are in metres.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .errors import Evanescent, NoGuidedMode, NonIntersecting, Unreachable


@dataclass(frozen=True)
class LayerStack:
    """SiN core in SiO2 cladding.

    Indices are given at ``reference_wavelength``; ``*_dispersion`` are
    linear slopes dn/dlambda (1/m), zero by default.
    """

    core_index: float = 1.89
    clad_index: float = 1.5
    core_thickness: float = 100e-9
    etch_depth: float = 40e-9
    reference_wavelength: float = 633e-9
    core_dispersion: float = 0.0
    clad_dispersion: float = 0.0

    def __post_init__(self):
        if not self.core_index > self.clad_index >= 1.0:
            raise ValueError("need core_index > clad_index >= 1")
        if not 0 <= self.etch_depth <= self.core_thickness:
            raise ValueError("need 0 <= etch_depth <= core_thickness")

    def core_at(self, wavelength):
        return self.core_index + self.core_dispersion * (wavelength - self.reference_wavelength)

    def clad_at(self, wavelength):
        return self.clad_index + self.clad_dispersion * (wavelength - self.reference_wavelength)


def _pol_factor(n_core, n_clad, polarization):
    if polarization == "TE":
        return 1.0
    if polarization == "TM":
        return (n_core / n_clad) ** 2
    raise ValueError(f"polarization must be 'TE' or 'TM', not {polarization!r}")


def slab_dispersion_residual(n_eff, n_core, n_clad, thickness, wavelength,
                             polarization="TE", order=0):
    """Phase residual of the symmetric-slab eigenvalue equation.

    ``kappa*d - 2*atan(eta*gamma/kappa) - order*pi``; zero on a guided mode.
    """
    k0 = 2 * math.pi / wavelength
    kappa = k0 * math.sqrt(max(n_core**2 - n_eff**2, 0.0))
    gamma = k0 * math.sqrt(max(n_eff**2 - n_clad**2, 0.0))
    eta = _pol_factor(n_core, n_clad, polarization)
    return kappa * thickness - 2 * math.atan2(eta * gamma, kappa) - order * math.pi


def guided_mode_count(n_core, n_clad, thickness, wavelength):
    """Number of guided modes of one polarization in a symmetric slab."""
    v = 2 * math.pi / wavelength * thickness * math.sqrt(n_core**2 - n_clad**2)
    return int(math.floor(v / math.pi)) + 1 if v > 0 else 0


def symmetric_slab_neff(n_core, n_clad, thickness, wavelength, polarization="TE", order=0):
    if thickness <= 0:
        raise ValueError("thickness must be positive")
    if not n_core > n_clad:
        raise NoGuidedMode("core index must exceed cladding index")
    k0 = 2 * math.pi / wavelength
    half_v = 0.5 * k0 * thickness * math.sqrt(n_core**2 - n_clad**2)
    eta = _pol_factor(n_core, n_clad, polarization)

    # u = kappa*d/2 runs over (0, half_v); the residual is monotone in u
    def f(u):
        w = math.sqrt(max(half_v**2 - u**2, 0.0))
        return 2 * u - 2 * math.atan2(eta * w, u) - order * math.pi

    if f(half_v) <= 0:
        raise NoGuidedMode(
            f"order-{order} {polarization} mode is below cutoff "
            f"(d={thickness:.3e} m, lambda={wavelength:.3e} m)")
    u = bisect(f, 0.0, half_v, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.sqrt(n_core**2 - (2 * u / (k0 * thickness)) ** 2)


def slab_neff(stack: LayerStack, wavelength, thickness=None, polarization="TE", order=0):
    """Effective index of a slab mode of the given stack."""
    thickness = stack.core_thickness if thickness is None else thickness
    return symmetric_slab_neff(stack.core_at(wavelength), stack.clad_at(wavelength),
                               thickness, wavelength, polarization, order)


@dataclass(frozen=True)
class WaveguideMode:
    n_eff: float
    n_slab: float
    single_mode: bool
    lateral_modes: int


def waveguide_neff(stack: LayerStack, width, wavelength) -> WaveguideMode:
    """Quasi-TE fundamental mode of a channel guide by the effective-index method.

    The in-plane field is TE for the vertical slab and TM for the lateral one.
    """
    if width <= 0:
        raise ValueError("width must be positive")
    n_clad = stack.clad_at(wavelength)
    n_slab = slab_neff(stack, wavelength)
    n_eff = symmetric_slab_neff(n_slab, n_clad, width, wavelength, "TM")
    vertical = guided_mode_count(stack.core_at(wavelength), n_clad, stack.core_thickness, wavelength)
    lateral = guided_mode_count(n_slab, n_clad, width, wavelength)
    return WaveguideMode(n_eff, n_slab, vertical == 1 and lateral == 1, lateral)


def grating_indices(stack: LayerStack, wavelength, duty_cycle=0.5):
    """(tooth, gap, duty-weighted) effective indices of the etched grating.

    Teeth keep the full core; gaps keep ``core_thickness - etch_depth``. A
    full etch leaves cladding in the gaps.
    """
    if not 0 < duty_cycle < 1:
        raise ValueError("duty_cycle must lie in (0, 1)")
    n_tooth = slab_neff(stack, wavelength)
    remaining = stack.core_thickness - stack.etch_depth
    n_gap = slab_neff(stack, wavelength, thickness=remaining) if remaining > 0 else stack.clad_at(wavelength)
    return n_tooth, n_gap, duty_cycle * n_tooth + (1 - duty_cycle) * n_gap


@dataclass(frozen=True)
class GratingSpec:
    """Uniform-period grating emitter.

    ``position`` is the emitter centre on the chip (m); ``azimuth`` the
    in-plane guided propagation direction.
    """

    period: float
    n_eff_tooth: float
    n_eff_gap: float
    duty_cycle: float = 0.5
    emitter_width: float = 18e-6
    transverse_focal_length: float | None = None
    position: tuple = (0.0, 0.0, 0.0)
    azimuth: tuple = (1.0, 0.0)
    design_wavelength: float | None = None
    name: str = ""
    polarization: str = field(default="parallel-to-chip")

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")
        if not 0 < self.duty_cycle < 1:
            raise ValueError("duty_cycle must lie in (0, 1)")
        az = np.asarray(self.azimuth, dtype=float)
        norm = np.hypot(*az)
        if norm == 0:
            raise ValueError("azimuth must be non-zero")
        object.__setattr__(self, "azimuth", tuple(az / norm))
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if not self.n_eff_grating > 1:
            raise ValueError("grating effective index must exceed 1")

    @property
    def n_eff_grating(self):
        return self.duty_cycle * self.n_eff_tooth + (1 - self.duty_cycle) * self.n_eff_gap


def _sin_emission(g: GratingSpec, wavelength, order, index_error):
    return g.n_eff_grating + index_error - order * wavelength / g.period


def emission_angle(g: GratingSpec, wavelength, order=1, index_error=0.0):
    """Vacuum emission angle in degrees for diffraction order ``order``."""
    s = _sin_emission(g, wavelength, order, index_error)
    if abs(s) > 1:
        raise Evanescent(f"order {order} at {wavelength:.4e} m does not propagate (sin={s:.4f})")
    return math.degrees(math.asin(s))


def phase_matching_residual(g: GratingSpec, wavelength, angle_deg, order=1, index_error=0.0):
    return _sin_emission(g, wavelength, order, index_error) - math.sin(math.radians(angle_deg))


def design_period(n_eff, wavelength, target_angle_deg, order=1):
    s = math.sin(math.radians(target_angle_deg))
    if n_eff - s <= 0:
        raise Unreachable(f"angle {target_angle_deg} deg is not reachable with n_eff={n_eff}")
    return order * wavelength / (n_eff - s)


def diffraction_orders(g: GratingSpec, wavelength, index_error=0.0):
    """All propagating orders m >= 1 as ``[(m, angle_deg), ...]``."""
    n = g.n_eff_grating + index_error
    m_max = int(math.floor((n + 1) * g.period / wavelength))
    out = []
    for m in range(1, m_max + 1):
        if abs(n - m * wavelength / g.period) <= 1:
            out.append((m, emission_angle(g, wavelength, m, index_error)))
    return out


def emission_direction(g: GratingSpec, wavelength, order=1, index_error=0.0, angle_offset_deg=0.0):
    theta = math.radians(emission_angle(g, wavelength, order, index_error) + angle_offset_deg)
    ax, ay = g.azimuth
    return np.array([math.sin(theta) * ax, math.sin(theta) * ay, math.cos(theta)])


def closest_approach(p1, d1, p2, d2):
    """Parameters (s1, s2) of the closest points of two lines p + s d."""
    p1, d1, p2, d2 = (np.asarray(v, dtype=float) for v in (p1, d1, p2, d2))
    w = p1 - p2
    a, b, c = d1 @ d1, d1 @ d2, d2 @ d2
    d, e = d1 @ w, d2 @ w
    det = a * c - b * b
    if det < 1e-14 * a * c:
        raise NonIntersecting("beam centrelines are parallel")
    return (b * e - c * d) / det, (a * e - b * d) / det


@dataclass(frozen=True)
class Crossing:
    height: float
    point: np.ndarray
    miss_distance: float
    dz_dn: float


def _crossing_point(gA, gB, lam_a, lam_b, index_error, angle_offsets, order):
    da = emission_direction(gA, lam_a, order, index_error, angle_offsets[0])
    db = emission_direction(gB, lam_b, order, index_error, angle_offsets[1])
    pa, pb = np.asarray(gA.position), np.asarray(gB.position)
    sa, sb = closest_approach(pa, da, pb, db)
    if sa <= 0 or sb <= 0:
        raise NonIntersecting("beam centrelines diverge above the chip")
    qa, qb = pa + sa * da, pb + sb * db
    return 0.5 * (qa + qb), float(np.linalg.norm(qa - qb))


def intersection_height(gA: GratingSpec, gB: GratingSpec, lam_a, lam_b, index_error=0.0,
                        angle_offsets=(0.0, 0.0), order=1, step=1e-4) -> Crossing:
    """Crossing height of two emitted beams in the ray model.

    ``index_error`` offsets both gratings' effective index; ``dz_dn`` is the
    central-difference sensitivity of the height to that offset.
    """
    point, miss = _crossing_point(gA, gB, lam_a, lam_b, index_error, angle_offsets, order)
    hi, _ = _crossing_point(gA, gB, lam_a, lam_b, index_error + step, angle_offsets, order)
    lo, _ = _crossing_point(gA, gB, lam_a, lam_b, index_error - step, angle_offsets, order)
    return Crossing(float(point[2]), point, miss, float((hi[2] - lo[2]) / (2 * step)))


def index_error_for_height(gA, gB, lam_a, lam_b, height, bracket=(-0.2, 0.2), order=1):
    """Common index offset that moves the crossing to ``height``."""
    def f(dn):
        return intersection_height(gA, gB, lam_a, lam_b, dn, order=order).height - height
    return bisect(f, *bracket, xtol=1e-12)


def design_grating(stack: LayerStack, wavelength, position, target, duty_cycle=0.5,
                   order=1, **kwargs) -> GratingSpec:
    """Grating at ``position`` whose first-order beam passes through ``target``."""
    position = np.asarray(position, dtype=float)
    delta = np.asarray(target, dtype=float) - position
    horizontal = np.hypot(delta[0], delta[1])
    if delta[2] <= 0:
        raise Unreachable("target must lie above the grating")
    if horizontal == 0:
        azimuth, angle = (1.0, 0.0), 0.0
    else:
        azimuth, angle = (delta[0] / horizontal, delta[1] / horizontal), math.degrees(math.atan2(horizontal, delta[2]))
    n_tooth, n_gap, n_grating = grating_indices(stack, wavelength, duty_cycle)
    return GratingSpec(period=design_period(n_grating, wavelength, angle, order),
                       n_eff_tooth=n_tooth, n_eff_gap=n_gap, duty_cycle=duty_cycle,
                       position=tuple(position), azimuth=azimuth,
                       design_wavelength=wavelength, **kwargs)
