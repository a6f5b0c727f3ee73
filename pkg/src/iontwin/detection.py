"""Photon-counting discrimination of the optical qubit.

A bright ion yields Poisson counts. A dark (D5/2) ion yields background
counts, plus ion counts for the part of the window after it decays back to
S1/2 at an exponentially distributed time t:

    P_dark(k) = e^{-T/tau} Pois(k; R_bg T)
              + int_0^T (1/tau) e^{-t/tau} [Pois(R_bg T) * Pois(R_s (T - t))](k) dt

with ``*`` the discrete convolution and R_s the ion signal rate. The
integral uses composite Simpson quadrature; the no-decay atom is added
exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import simpson
from scipy.stats import poisson

TAIL = 1e-12


@dataclass(frozen=True)
class DetectionModel:
    """Rates in counts/s at the detector, times in s.

    If ``background_additive`` the bright state registers
    ``ion_rate + background_rate``; otherwise ``ion_rate`` is already the
    total bright-state rate and the ion contributes ``ion_rate -
    background_rate`` on top of background.
    """

    ion_rate: float
    background_rate: float
    window: float
    d_lifetime: float
    background_additive: bool = True

    def __post_init__(self):
        if self.ion_rate < 0 or self.background_rate < 0:
            raise ValueError("rates must be non-negative")
        if not self.window > 0:
            raise ValueError("window must be positive")
        if not self.d_lifetime > 0:
            raise ValueError("D5/2 lifetime must be positive")
        if not self.background_additive and self.ion_rate < self.background_rate:
            raise ValueError("total bright rate is below the background rate")

    @property
    def bright_rate(self):
        return self.ion_rate + self.background_rate if self.background_additive else self.ion_rate

    @property
    def signal_rate(self):
        return self.bright_rate - self.background_rate

    def with_window(self, window):
        return replace(self, window=window)


@dataclass(frozen=True)
class CountHistogram:
    probabilities: np.ndarray  # index k -> P(k)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(p.sum() - 1) > 1e-9:
            raise ValueError(f"histogram not normalised (sum={p.sum()!r})")
        object.__setattr__(self, "probabilities", p)

    @property
    def support(self):
        return len(self.probabilities)

    @property
    def mean(self):
        return float(np.arange(self.support) @ self.probabilities)

    @property
    def variance(self):
        k = np.arange(self.support)
        return float((k - self.mean) ** 2 @ self.probabilities)

    def padded(self, n):
        p = np.zeros(max(n, self.support))
        p[:self.support] = self.probabilities
        return p


def _support(mean):
    return int(poisson.isf(TAIL, mean)) + 2 if mean > 0 else 1


def _normalised(p):
    return CountHistogram(p / math.fsum(p))


def poisson_histogram(mean, support=None) -> CountHistogram:
    n = support or _support(mean)
    return _normalised(poisson.pmf(np.arange(n), mean))


def bright_histogram(model: DetectionModel) -> CountHistogram:
    return poisson_histogram(model.bright_rate * model.window)


def dark_histogram_with_decay(model: DetectionModel, nodes=401) -> CountHistogram:
    if nodes < 201 or nodes % 2 == 0:
        raise ValueError("Simpson quadrature needs an odd node count >= 201")
    T, tau = model.window, model.d_lifetime
    n = _support(model.bright_rate * T)
    k = np.arange(n)
    bg = poisson.pmf(k, model.background_rate * T)
    t = np.linspace(0.0, T, nodes)
    weights = np.exp(-t / tau) / tau
    dens = np.empty((nodes, n))
    for i, ti in enumerate(t):
        sig = poisson.pmf(k, model.signal_rate * (T - ti))
        dens[i] = np.convolve(bg, sig)[:n] * weights[i]
    p = math.exp(-T / tau) * bg + simpson(dens, x=t, axis=0)
    return _normalised(np.clip(p, 0.0, None))


def dark_mean(model: DetectionModel):
    """Closed-form first moment of :func:`dark_histogram_with_decay`."""
    T, tau = model.window, model.d_lifetime
    return model.background_rate * T + model.signal_rate * (T - tau * (1 - math.exp(-T / tau)))


@dataclass(frozen=True)
class FidelityResult:
    threshold: int
    eps_d: float
    eps_b: float
    mean_fidelity: float


def fidelity(bright: CountHistogram, dark: CountHistogram) -> FidelityResult:
    """Best integer threshold: k <= k* is called dark."""
    n = max(bright.support, dark.support)
    pb, pd = bright.padded(n), dark.padded(n)
    eps_b = np.cumsum(pb)  # bright read as dark for threshold k
    eps_d = 1.0 - np.cumsum(pd)  # dark read as bright
    err = 0.5 * (eps_b + np.clip(eps_d, 0, None))
    kstar = int(np.argmin(err))
    # k* = -1 (every count called bright) has error exactly 1/2
    if err[kstar] > 0.5:
        return FidelityResult(-1, 1.0, 0.0, 0.5)
    return FidelityResult(kstar, float(max(eps_d[kstar], 0.0)), float(eps_b[kstar]),
                          float(1 - err[kstar]))


def model_fidelity(model: DetectionModel) -> FidelityResult:
    return fidelity(bright_histogram(model), dark_histogram_with_decay(model))


def fidelity_vs_window(model: DetectionModel, windows):
    """[(T, F)] for each window, and the window with the highest F."""
    rows = []
    for T in windows:
        if not T > 0:
            raise ValueError("windows must be positive")
        rows.append((float(T), model_fidelity(model.with_window(T)).mean_fidelity))
    best = max(rows, key=lambda r: r[1])[0]
    return rows, best


def sample_dark_counts(model: DetectionModel, shots, seed, chunk=1_000_000):
    """Monte Carlo of the dark-state count: draw a decay time, then background
    and post-decay ion counts. Chunk c uses the stream SeedSequence([seed, c])
    so the result does not depend on how chunks are scheduled."""
    T, tau = model.window, model.d_lifetime
    out = []
    for c, start in enumerate(range(0, shots, chunk)):
        m = min(chunk, shots - start)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, c])))
        t = rng.exponential(tau, m)
        lit = np.clip(T - t, 0.0, None)
        out.append(rng.poisson(model.background_rate * T, m) + rng.poisson(model.signal_rate * lit))
    return np.concatenate(out)


def empirical_histogram(counts, support=None) -> CountHistogram:
    n = max(int(counts.max()) + 1, support or 0)
    return CountHistogram(np.bincount(counts, minlength=n) / len(counts))


def total_variation(a: CountHistogram, b: CountHistogram):
    n = max(a.support, b.support)
    return 0.5 * float(np.abs(a.padded(n) - b.padded(n)).sum())
