"""Astigmatic Gaussian beams above the chip and beam-profiling procedures.

A beam has two transverse axes. The *focused* axis ``u`` is horizontal
(parallel to the chip, perpendicular to the beam); the *unfocused* axis
``v = d x u`` is the remaining, mostly vertical, transverse direction. For a
beam travelling straight up, ``u`` is x and ``v`` is y. Each axis has its own
waist and focus distance measured along the beam from ``origin``.

Widths are 1/e^2 intensity radii; diameters are twice that.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.optimize import OptimizeWarning, curve_fit

from .errors import DegenerateFit

_VERTICAL_TOL = 1e-9


@dataclass(frozen=True)
class BeamField:
    wavelength: float
    power: float
    origin: tuple
    direction: tuple
    waist_focused: float
    waist_unfocused: float
    focus_focused: float = 0.0
    focus_unfocused: float = 0.0
    name: str = ""

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("direction must be non-zero")
        object.__setattr__(self, "direction", tuple(d / n))
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        if self.waist_focused <= 0 or self.waist_unfocused <= 0:
            raise ValueError("waists must be positive")
        if self.power < 0:
            raise ValueError("power must be non-negative")

    @classmethod
    def from_angles(cls, wavelength, power, origin, angle_deg, azimuth_deg, **kwargs):
        """Beam tilted ``angle_deg`` from the normal toward ``azimuth_deg`` (from +x)."""
        t, p = math.radians(angle_deg), math.radians(azimuth_deg)
        direction = (math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t))
        return cls(wavelength, power, origin, direction, **kwargs)

    @property
    def angle_deg(self):
        return math.degrees(math.acos(min(1.0, self.direction[2])))

    def frame(self):
        """Orthonormal (d, u, v)."""
        d = np.asarray(self.direction)
        u = np.cross([0.0, 0.0, 1.0], d)
        nu = np.linalg.norm(u)
        if nu < _VERTICAL_TOL:
            u = np.array([1.0, 0.0, 0.0]) - d[0] * d
            nu = np.linalg.norm(u)
        u = u / nu
        return d, u, np.cross(d, u)

    def rayleigh(self):
        return (math.pi * self.waist_focused**2 / self.wavelength,
                math.pi * self.waist_unfocused**2 / self.wavelength)

    def widths(self, s):
        """1/e^2 radii (focused, unfocused) at distance ``s`` along the beam."""
        zf, zu = self.rayleigh()
        s = np.asarray(s, dtype=float)
        wf = self.waist_focused * np.sqrt(1 + ((s - self.focus_focused) / zf) ** 2)
        wu = self.waist_unfocused * np.sqrt(1 + ((s - self.focus_unfocused) / zu) ** 2)
        return wf, wu

    def local_coords(self, points):
        d, u, v = self.frame()
        rel = np.asarray(points, dtype=float) - np.asarray(self.origin)
        return rel @ d, rel @ u, rel @ v

    def point_at_height(self, z):
        """Centreline point at height ``z``."""
        o, d = np.asarray(self.origin), np.asarray(self.direction)
        if abs(d[2]) < 1e-15:
            raise ValueError("beam is parallel to the chip")
        return o + (z - o[2]) / d[2] * d


def intensity_at(beam: BeamField, points):
    """Intensity (W/m^2) at one point or an array of points of shape (..., 3)."""
    s, a, b = beam.local_coords(points)
    wa, wb = beam.widths(s)
    return 2 * beam.power / (math.pi * wa * wb) * np.exp(-2 * a**2 / wa**2 - 2 * b**2 / wb**2)


def peak_intensity(power, diameter_a, diameter_b):
    """On-axis intensity of an elliptical Gaussian with the given 1/e^2 diameters."""
    return 8 * power / (math.pi * diameter_a * diameter_b)


def transverse_power(beam: BeamField, s, half_width_factor=6.0, n=401):
    """Power through the plane normal to the beam at distance ``s`` (2D quadrature)."""
    from scipy.integrate import simpson
    wa, wb = beam.widths(s)
    a = np.linspace(-half_width_factor * wa, half_width_factor * wa, n)
    b = np.linspace(-half_width_factor * wb, half_width_factor * wb, n)
    d, u, v = beam.frame()
    A, B = np.meshgrid(a, b, indexing="ij")
    pts = np.asarray(beam.origin) + s * d + A[..., None] * u + B[..., None] * v
    return float(simpson(simpson(intensity_at(beam, pts), x=b, axis=1), x=a))


@dataclass(frozen=True)
class FocalStack:
    heights: np.ndarray
    x: np.ndarray
    y: np.ndarray
    slices: np.ndarray  # (n_heights, n_y, n_x)

    def __post_init__(self):
        if np.any(np.diff(self.heights) <= 0):
            raise ValueError("heights must be strictly increasing")
        if self.slices.shape != (len(self.heights), len(self.y), len(self.x)):
            raise ValueError("slice array shape does not match the grid")


def default_heights():
    return np.arange(0.0, 100e-6 + 1e-12, 2.5e-6)


def synthesize_stack(beam: BeamField, heights=None, half_width=40e-6, spacing=0.5e-6,
                     center=(0.0, 0.0)) -> FocalStack:
    heights = default_heights() if heights is None else np.asarray(heights, dtype=float)
    n = int(round(2 * half_width / spacing)) + 1
    x = center[0] + np.linspace(-half_width, half_width, n)
    y = center[1] + np.linspace(-half_width, half_width, n)
    X, Y = np.meshgrid(x, y)
    slices = np.empty((len(heights), n, n))
    for k, z in enumerate(heights):
        pts = np.stack([X, Y, np.full_like(X, z)], axis=-1)
        slices[k] = intensity_at(beam, pts)
    return FocalStack(heights, x, y, slices)


def add_noise(stack: FocalStack, relative, rng, black_level=5.0) -> FocalStack:
    """Camera-like frames: Gaussian noise of ``relative`` x stack maximum on a
    dark offset of ``black_level`` noise sigmas, clipped at zero."""
    sigma = relative * stack.slices.max()
    noisy = stack.slices + black_level * sigma + rng.normal(0.0, sigma, stack.slices.shape)
    noisy = np.clip(noisy, 0.0, None)
    return replace(stack, slices=noisy)


def slice_moments(image, x, y, roi_factor=2.0, iterations=20, border=4):
    """Baseline-corrected centroid and covariance of one slice.

    The baseline is the mean of a ``border``-pixel frame. Moments are then
    iterated inside an elliptical aperture of ``roi_factor`` x the current
    1/e^2 diameter.
    """
    frame = np.concatenate([image[:border].ravel(), image[-border:].ravel(),
                            image[border:-border, :border].ravel(), image[border:-border, -border:].ravel()])
    img = image - frame.mean()
    X, Y = np.meshgrid(x, y)
    # seed aperture: smoothed half-maximum region
    smooth = gaussian_filter(img, 2.0)
    mask = smooth >= 0.5 * smooth.max()
    mean = cov = None
    for _ in range(iterations):
        w = np.where(mask, img, 0.0)
        total = w.sum()
        if total <= 0:
            raise DegenerateFit("slice has no positive signal")
        mx, my = (w * X).sum() / total, (w * Y).sum() / total
        dx, dy = X - mx, Y - my
        sxx, syy, sxy = (w * dx * dx).sum() / total, (w * dy * dy).sum() / total, (w * dx * dy).sum() / total
        new_cov = np.array([[sxx, sxy], [sxy, syy]])
        if np.any(np.linalg.eigvalsh(new_cov) <= 0):
            raise DegenerateFit("non-positive second moment")
        new_mean = np.array([mx, my])
        # aperture radius = roi_factor * diameter / 2 = roi_factor * 2 sigma
        inv = np.linalg.inv(new_cov)
        r2 = inv[0, 0] * dx * dx + 2 * inv[0, 1] * dx * dy + inv[1, 1] * dy * dy
        new_mask = r2 <= (2 * roi_factor) ** 2
        converged = mean is not None and np.allclose(new_mean, mean, rtol=0, atol=1e-12) \
            and np.allclose(new_cov, cov, rtol=1e-10, atol=0)
        mean, cov, mask = new_mean, new_cov, new_mask
        if converged:
            break
    return mean, cov


@dataclass(frozen=True)
class BeamEstimate:
    direction: np.ndarray
    angle_deg: float
    azimuth_deg: float
    origin: np.ndarray
    waist_focused: float
    waist_unfocused: float
    focus_focused: float
    focus_unfocused: float
    centroid_rms: float
    width_rms: tuple

    def focus_height(self, axis="focused"):
        s = self.focus_focused if axis == "focused" else self.focus_unfocused
        return float(self.origin[2] + s * self.direction[2])


def _hyperbola(s, w):
    """Least-squares fit of w^2 = A + B s + C s^2; returns (waist, focus, rms)."""
    s, w2 = np.asarray(s), np.asarray(w) ** 2
    if np.ptp(w2) <= 1e-9 * w2.mean():
        raise DegenerateFit("beam width does not vary across the stack")
    M = np.vstack([np.ones_like(s), s, s * s]).T
    (A, B, C), *_ = np.linalg.lstsq(M, w2, rcond=None)
    if C <= 0:
        raise DegenerateFit("width data are not hyperbolic (no focus)")
    w0sq = A - B * B / (4 * C)
    if w0sq <= 0:
        raise DegenerateFit("fitted waist is not positive")
    rms = float(np.sqrt(np.mean((M @ [A, B, C] - w2) ** 2)))
    return math.sqrt(w0sq), -B / (2 * C), rms


def reconstruct_beam(stack: FocalStack, roi_factor=2.0) -> BeamEstimate:
    """Recover direction, waists and foci from a focal stack.

    Slice centroids give the direction by a straight-line fit against height.
    Slice second moments are projected onto the horizontal axis perpendicular
    to the beam (focused) and onto the in-plane tilt axis, the latter shrunk by
    cos(theta) to undo the oblique cut; each width series is then fitted with
    a hyperbola in the distance along the beam.
    """
    z = np.asarray(stack.heights)
    if len(z) < 3:
        raise DegenerateFit("need at least three slices")
    moments = [slice_moments(img, stack.x, stack.y, roi_factor) for img in stack.slices]
    cent = np.array([m[0] for m in moments])
    covs = np.array([m[1] for m in moments])

    G = np.vstack([np.ones_like(z), z]).T
    coef, *_ = np.linalg.lstsq(G, cent, rcond=None)
    (x0, y0), (mx, my) = coef
    centroid_rms = float(np.sqrt(np.mean(np.sum((G @ coef - cent) ** 2, axis=1))))
    direction = np.array([mx, my, 1.0])
    direction /= np.linalg.norm(direction)
    tan_t = math.hypot(mx, my)
    theta = math.atan(tan_t)
    if tan_t * (z[-1] - z[0]) < 1e-3 * (stack.x[1] - stack.x[0]):
        r_hat, u_hat, phi = np.array([0.0, 1.0]), np.array([1.0, 0.0]), 0.0
    else:
        phi = math.atan2(my, mx)
        r_hat = np.array([math.cos(phi), math.sin(phi)])
        u_hat = np.array([-math.sin(phi), math.cos(phi)])

    var_u = np.einsum("i,kij,j->k", u_hat, covs, u_hat)
    var_r = np.einsum("i,kij,j->k", r_hat, covs, r_hat)
    w_f = 2 * np.sqrt(var_u)
    w_u = 2 * np.sqrt(var_r) * math.cos(theta)
    s = z / math.cos(theta)
    wf0, sf, rf = _hyperbola(s, w_f)
    wu0, su, ru = _hyperbola(s, w_u)
    return BeamEstimate(direction, math.degrees(theta), math.degrees(phi),
                        np.array([x0, y0, 0.0]), wf0, wu0, sf, su, centroid_rms, (rf, ru))


def gaussian_profile(y, amplitude, center, radius):
    return amplitude * np.exp(-2 * (y - center) ** 2 / radius**2)


@dataclass(frozen=True)
class ProfileFit:
    center: float
    diameter: float
    amplitude: float
    center_err: float
    diameter_err: float


def fit_profile(y, signal) -> ProfileFit:
    """Fit ``A exp(-2 (y-c)^2 / w^2)``; reports the 1/e^2 diameter 2w."""
    y, signal = np.asarray(y, dtype=float), np.asarray(signal, dtype=float)
    wts = np.clip(signal, 0, None)
    if wts.sum() <= 0:
        raise DegenerateFit("profile has no positive signal")
    c0 = (wts * y).sum() / wts.sum()
    r0 = 2 * math.sqrt(max((wts * (y - c0) ** 2).sum() / wts.sum(), (y[1] - y[0]) ** 2))
    with warnings.catch_warnings():
        # an exact (noiseless) fit has zero residual and an unscalable covariance
        warnings.simplefilter("ignore", OptimizeWarning)
        try:
            popt, pcov = curve_fit(gaussian_profile, y, signal, p0=[signal.max(), c0, r0])
        except RuntimeError as exc:
            raise DegenerateFit(f"Gaussian fit did not converge: {exc}") from exc
    err = np.sqrt(np.diag(pcov))
    if not np.all(np.isfinite(err)):
        exact = np.allclose(gaussian_profile(y, *popt), signal, rtol=1e-9, atol=1e-12 * np.abs(signal).max())
        err = np.zeros(3) if exact else np.full(3, np.nan)
    return ProfileFit(float(popt[1]), float(2 * abs(popt[2])), float(popt[0]), float(err[1]), float(2 * err[2]))


def cut_points(height, y, x=0.0):
    y = np.asarray(y, dtype=float)
    return np.stack([np.full_like(y, x), y, np.full_like(y, height)], axis=-1)


@dataclass(frozen=True)
class AxialCut:
    y: np.ndarray
    intensity: np.ndarray
    fit: ProfileFit


def default_cut_axis():
    return np.arange(-40e-6, 40e-6 + 1e-12, 0.25e-6)


def axial_cut(beam: BeamField, height, y=None, x=0.0) -> AxialCut:
    """Intensity along the trap axis (y) at fixed height, with a Gaussian fit."""
    y = default_cut_axis() if y is None else np.asarray(y, dtype=float)
    inten = intensity_at(beam, cut_points(height, y, x))
    return AxialCut(y, inten, fit_profile(y, inten))


def calibrate_to_cut(beam: BeamField, height, center, diameter, axis="unfocused",
                     x=0.0, tol=1e-10, max_iter=100) -> BeamField:
    """Shift ``beam`` along y and rescale one waist so its axial cut fits
    ``center`` and ``diameter``."""
    attr = "waist_unfocused" if axis == "unfocused" else "waist_focused"
    span = 6 * diameter
    y = np.linspace(center - span, center + span, 1201)
    o = beam.origin
    start = beam.point_at_height(height)
    beam = replace(beam, origin=(o[0], o[1] + center - start[1], o[2]))
    for _ in range(max_iter):
        fit = axial_cut(beam, height, y, x).fit
        dc, ratio = center - fit.center, diameter / fit.diameter
        o = beam.origin
        beam = replace(beam, origin=(o[0], o[1] + dc, o[2]), **{attr: getattr(beam, attr) * ratio})
        if abs(dc) < tol * diameter and abs(ratio - 1) < tol:
            return beam
    raise DegenerateFit("cut calibration did not converge")
