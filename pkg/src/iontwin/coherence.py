"""Ramsey coherence under platform vibration.

Between the two pi/2 pulses every shot picks up a phase error: Gaussian
diffusion with variance 2T/tau0, which gives an exponential contrast decay
e^{-T/tau0}, plus a Doppler phase (2 pi / lambda)[x(t0+T) - x(t0)] from the
motion of the ion relative to a free-space delivery optic. With the light
emitted from the chip that moves with the ion, the relative displacement and
hence the vibration phase are exactly zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateTrack, FitFailure, InsufficientStatistics

FREE_SPACE = "free_space"
INTEGRATED = "integrated"
CONTRAST_FLOOR = 1e-3

# random stream ids per (delay, phase) cell
_NOISE, _VIB, _READ = 0, 1, 2


@dataclass(frozen=True)
class VibrationScenario:
    amplitude: float  # m
    frequency: float  # angular, rad/s
    delivery: str = FREE_SPACE
    qubit_wavelength: float = 674e-9
    baseline_coherence: float = 600e-6

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if not self.frequency > 0:
            raise ValueError("vibration frequency must be positive")
        if not self.baseline_coherence > 0:
            raise ValueError("baseline coherence time must be positive")
        if self.delivery not in (FREE_SPACE, INTEGRATED):
            raise ValueError(f"unknown delivery {self.delivery!r}")

    @property
    def peak_velocity(self):
        return self.amplitude * self.frequency

    @property
    def peak_acceleration(self):
        return self.amplitude * self.frequency**2

    def with_acceleration(self, acceleration):
        return replace(self, amplitude=acceleration / self.frequency**2)


def doppler_peak(scn: VibrationScenario):
    """Peak first-order Doppler shift (Hz) of the qubit light."""
    return scn.peak_velocity / scn.qubit_wavelength


def amplitude_for_doppler(f_doppler, frequency, wavelength=674e-9):
    return f_doppler * wavelength / frequency


def baseline_phase_noise(T, tau0, rng, size=None):
    """Gaussian phase diffusion with variance 2T/tau0."""
    if T < 0:
        raise ValueError("delay must be non-negative")
    return rng.normal(0.0, math.sqrt(2 * T / tau0), size)


def vibration_phase(scn: VibrationScenario, T, theta):
    """Doppler phase accumulated over delay T for mechanical phases ``theta``."""
    if scn.delivery == INTEGRATED:
        return np.zeros_like(np.asarray(theta, dtype=float))
    k = 2 * math.pi / scn.qubit_wavelength
    return k * scn.amplitude * (np.sin(scn.frequency * T + theta) - np.sin(theta))


def _stream(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class SinusoidFit:
    contrast: float
    contrast_err: float
    offset: float
    phase: float


def fit_fringe(phases, p_bright, shots):
    """Linear least squares of a + b cos(phi) + c sin(phi); contrast 2 sqrt(b^2+c^2).

    Errors propagate the binomial variance of each point through the fit.
    """
    phases = np.asarray(phases, dtype=float)
    p = np.asarray(p_bright, dtype=float)
    X = np.vstack([np.ones_like(phases), np.cos(phases), np.sin(phases)]).T
    beta, *_ = np.linalg.lstsq(X, p, rcond=None)
    pc = np.clip(p, 0.5 / shots, 1 - 0.5 / shots)
    var = pc * (1 - pc) / shots
    XtX_inv = np.linalg.inv(X.T @ X)
    cov = XtX_inv @ (X.T * var) @ X @ XtX_inv
    a, b, c = beta
    amp = math.hypot(b, c)
    if amp > 0:
        g = np.array([0.0, b, c]) * 2 / amp
    else:
        g = np.array([0.0, math.sqrt(2), math.sqrt(2)])
    err = float(math.sqrt(max(g @ cov @ g, 0.0)))
    return SinusoidFit(2 * amp, err, float(a), math.atan2(-c, b))


@dataclass(frozen=True)
class ExpFit:
    tau: float
    tau_err: float
    amplitude: float


def fit_exponential(delays, contrasts, errors):
    """Weighted fit of log C = log C0 - T/tau, contrasts clipped at 1e-3.

    Uncertainties are absolute (taken from ``errors``), from the Jacobian of
    the linear model.
    """
    T = np.asarray(delays, dtype=float)
    C = np.clip(np.asarray(contrasts, dtype=float), CONTRAST_FLOOR, None)
    err = np.asarray(errors, dtype=float)
    sig = np.maximum(err, 1e-12) / C
    if len(T) < 3:
        raise FitFailure("need at least three delays for an exponential fit")
    X = np.vstack([np.ones_like(T), -T]).T / sig[:, None]
    y = np.log(C) / sig
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    cov = np.linalg.inv(X.T @ X)
    log_c0, kappa = beta
    if not kappa > 0:
        raise FitFailure(f"contrast does not decay (rate {kappa:.3e} /s)")
    tau = 1 / kappa
    return ExpFit(float(tau), float(math.sqrt(cov[1, 1]) * tau**2), float(math.exp(log_c0)))


@dataclass(frozen=True)
class RamseyResult:
    delays: np.ndarray
    contrasts: np.ndarray
    contrast_errors: np.ndarray
    fitted_tau: float
    tau_error: float
    amplitude: float = 1.0


def ramsey_scan(scn: VibrationScenario, delays, phases=8, shots_per_point=1000, seed=0,
                strict=False, significance=3.0) -> RamseyResult:
    """Monte Carlo Ramsey experiment.

    ``phases`` is a count of evenly spaced analysis phases or an explicit
    list; ``shots_per_point`` is per (delay, phase). Cell (i, j) draws from
    independent streams keyed by (seed, i, j, stream) so results do not
    depend on evaluation order, and free-space and integrated runs with the
    same seed share their noise and readout draws.

    The exponential is fitted to the initial decay, which ends before the
    first contrast below ``significance`` standard errors and before a
    significant local minimum. Later points carry no exponential information
    (noise floor, or revivals of the vibration term).
    """
    delays = np.asarray(delays, dtype=float)
    if np.any(np.diff(delays) <= 0):
        raise ValueError("delays must be strictly increasing")
    phases = (np.arange(phases) * 2 * math.pi / phases if np.ndim(phases) == 0
              else np.asarray(phases, dtype=float))
    if len(phases) < 6:
        raise ValueError("need at least six analysis phases")
    if shots_per_point < 100:
        raise ValueError("need at least 100 shots per point")

    C, E = [], []
    for i, T in enumerate(delays):
        p = np.empty(len(phases))
        for j, phi in enumerate(phases):
            noise = baseline_phase_noise(T, scn.baseline_coherence, _stream(seed, i, j, _NOISE),
                                         shots_per_point)
            theta = _stream(seed, i, j, _VIB).uniform(0, 2 * math.pi, shots_per_point)
            dphi = noise + vibration_phase(scn, T, theta)
            prob = 0.5 * (1 + np.cos(phi + dphi))
            u = _stream(seed, i, j, _READ).random(shots_per_point)
            p[j] = np.count_nonzero(u < prob) / shots_per_point
        fit = fit_fringe(phases, p, shots_per_point)
        C.append(min(fit.contrast, 1.0))
        E.append(fit.contrast_err)
    C, E = np.array(C), np.array(E)

    rises = np.nonzero(np.diff(C) > significance * np.hypot(E[1:], E[:-1]))[0]
    if strict and len(rises):
        k = int(rises[0])
        raise FitFailure(f"contrast rises from {C[k]:.3f} to {C[k + 1]:.3f} between "
                         f"T={delays[k]:.3e} s and {delays[k + 1]:.3e} s beyond noise")
    ends = list(np.nonzero(C < significance * E)[0]) + list(rises)
    n_fit = int(min(ends)) if ends else len(C)
    fit = fit_exponential(delays[:n_fit], C[:n_fit], E[:n_fit])
    return RamseyResult(delays, C, E, fit.tau, fit.tau_err, fit.amplitude)


def default_delays():
    """Delay grid resolving both the 600 us baseline and sub-50 us vibration decays."""
    return np.array([0, 5, 10, 20, 30, 45, 60, 80, 100, 150, 200, 300, 450, 600, 800, 1000,
                     1300]) * 1e-6


def fixture_accelerations(a_max, n=6):
    return np.linspace(0.0, a_max, n)


def vibration_sweep(scn: VibrationScenario, accelerations, delays=None, phases=8,
                    shots_per_point=1000, seed=0):
    """Ramsey scans for both deliveries at each acceleration (same seed at each
    point, so the deliveries and accelerations share random draws)."""
    delays = default_delays() if delays is None else delays
    out = {}
    for delivery in (FREE_SPACE, INTEGRATED):
        out[delivery] = [ramsey_scan(replace(scn, delivery=delivery).with_acceleration(a),
                                     delays, phases, shots_per_point, seed)
                         for a in accelerations]
    return out


def _log_tau_slope(accelerations, results):
    a = np.asarray(accelerations, dtype=float)
    tau = np.array([r.fitted_tau for r in results])
    sig = np.array([r.tau_error for r in results]) / tau
    if np.any(sig <= 0):
        raise InsufficientStatistics("a fitted decay time has zero uncertainty")
    X = np.vstack([np.ones_like(a), a]).T / sig[:, None]
    beta, *_ = np.linalg.lstsq(X, np.log(tau) / sig, rcond=None)
    cov = np.linalg.inv(X.T @ X)
    return float(beta[1]), float(math.sqrt(cov[1, 1]))


def suppression_bound(accelerations, free, integrated):
    """|d log tau / da| on free-space data over the 1-sigma uncertainty of the
    same slope on integrated data."""
    if not (len(accelerations) == len(free) == len(integrated)):
        raise ValueError("series must share the acceleration grid")
    slope_free, _ = _log_tau_slope(accelerations, free)
    _, sigma_int = _log_tau_slope(accelerations, integrated)
    if sigma_int == 0:
        raise InsufficientStatistics("integrated slope uncertainty is zero")
    return abs(slope_free) / sigma_int


def _fit_orbit(t, xy, omega):
    X = np.vstack([np.ones_like(t), np.cos(omega * t), np.sin(omega * t)]).T
    coef, *_ = np.linalg.lstsq(X, xy, rcond=None)
    return coef, float(np.sum((X @ coef - xy) ** 2))


def acceleration_from_track(positions, timestamps, resolution=0.0):
    """Lower bound on the peak acceleration of a 2D track by the circular
    approximation a = v^2 / r.

    A sinusoidal orbit is fitted (frequency by a periodogram scan refined by
    least squares); v is the peak speed and r the largest excursion from the
    orbit centre. Three-sample tracks fall back to finite differences.
    """
    xy = np.asarray(positions, dtype=float)
    t = np.asarray(timestamps, dtype=float)
    if xy.ndim != 2 or xy.shape[1] != 2 or len(xy) != len(t):
        raise ValueError("positions must be (N, 2) matching timestamps")
    if len(t) < 3:
        raise DegenerateTrack("need at least three samples")
    extent = float(np.max(np.linalg.norm(xy - xy.mean(axis=0), axis=1)))
    if extent < resolution or extent == 0:
        if extent == 0 and resolution == 0:
            return 0.0
        raise DegenerateTrack(f"track extent {extent:.3e} m is below resolution {resolution:.3e} m")
    t = t - t[0]
    if len(t) < 5:
        v = np.linalg.norm(np.diff(xy, axis=0), axis=1) / np.diff(t)
        return float(v.max() ** 2 / extent)

    span = t[-1]
    dt = np.min(np.diff(t))
    omegas = np.linspace(2 * math.pi / span, math.pi / dt, 4000)
    resid = [_fit_orbit(t, xy, w)[1] for w in omegas]
    w0, step = omegas[int(np.argmin(resid))], omegas[1] - omegas[0]
    sol = minimize_scalar(lambda w: _fit_orbit(t, xy, w)[1], bounds=(w0 - step, w0 + step),
                          method="bounded", options={"xatol": 1e-10 * w0})
    omega = float(sol.x)
    coef, _ = _fit_orbit(t, xy, omega)
    semi_major = float(np.linalg.svd(coef[1:], compute_uv=False)[0])
    v = omega * semi_major
    return v**2 / semi_major
