"""Frequency-domain post-processing: discrete Fourier transforms of time
traces, BIC-selected sinusoid fits, and dynamical-structure-factor assembly.

Traces live on uniform grids tau..T (the zero-separation point is fixed to 0
by symmetry and is not stored); the all-sine fit basis enforces model(0) = 0
automatically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .estimators import GreenTrace


@dataclass
class SpectrumResult:
    frequencies: np.ndarray
    amplitudes: np.ndarray
    window: str = "none"

    def magnitude(self) -> np.ndarray:
        return np.abs(self.amplitudes)


@dataclass
class SpectralModel:
    """Fitted sum of sines: value(t) = sum_e amps[e] sin(freqs[e] t)."""

    frequencies: np.ndarray
    amplitudes: np.ndarray
    bic: float
    residual_chi2: float

    def __post_init__(self):
        order = np.argsort(self.frequencies)
        self.frequencies = np.asarray(self.frequencies, dtype=float)[order]
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)[order]
        if np.any(self.frequencies < 0):
            raise ValueError("mode frequencies must be non-negative")

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        t = np.asarray(times, dtype=float)
        return np.sin(np.outer(t, self.frequencies)) @ self.amplitudes


@dataclass
class DSFGrid:
    """S(q, omega) intensities, normalized to a maximum of 1."""

    q_values: np.ndarray
    omega_values: np.ndarray
    intensities: np.ndarray  # (n_q, n_omega)
    sigma: float

    def __post_init__(self):
        if self.intensities.shape != (len(self.q_values), len(self.omega_values)):
            raise ValueError("intensity grid shape mismatch")


# ---------------------------------------------------------------------------
# Fourier transform


def _check_uniform(times: np.ndarray) -> float:
    dt = np.diff(times)
    if len(dt) == 0 or not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
        raise ValueError("trace must live on a uniform time grid")
    return float(dt[0])


def fourier_time(trace: GreenTrace, window: str = "none",
                 oversample: int = 1) -> SpectrumResult:
    """Discrete Fourier transform of the sampled trace.

    window='symmetrized' extends the signal to negative times before
    transforming (odd extension for real traces, Hermitian for complex
    ones), which doubles the grid and symmetrizes the spectrum.
    oversample > 1 zero-pads by that factor: no extra information, but a
    finer frequency grid that stabilizes peak interpolation.
    """
    dt = _check_uniform(trace.times)
    y = np.asarray(trace.values)
    if window == "none":
        samples = y
    elif window == "symmetrized":
        if np.iscomplexobj(y):
            mirrored = np.conj(y[::-1])  # G(-t) = conj(G(t)) extension
        else:
            mirrored = -y[::-1]  # odd extension of the sine-series signal
        samples = np.concatenate([mirrored, [0.0 if not np.iscomplexobj(y) else 0j], y])
    else:
        raise ValueError(f"unknown window {window!r}")
    n_fft = int(oversample) * len(samples)
    amps = np.fft.fft(samples, n=n_fft) * dt
    freqs = 2 * np.pi * np.fft.fftfreq(n_fft, d=dt)
    order = np.argsort(freqs)
    return SpectrumResult(freqs[order], amps[order], window)


def parseval_check(trace: GreenTrace, spectrum: SpectrumResult) -> tuple[float, float]:
    """Time-domain and frequency-domain energies (equal for window='none')."""
    dt = _check_uniform(trace.times)
    t_energy = float(np.sum(np.abs(trace.values) ** 2) * dt)
    df = spectrum.frequencies[1] - spectrum.frequencies[0]
    f_energy = float(np.sum(np.abs(spectrum.amplitudes) ** 2) * df / (2 * np.pi))
    return t_energy, f_energy


def dominant_peaks(spectrum: SpectrumResult, threshold: float = 0.05,
                   max_peaks: int = 12) -> list[tuple[float, float]]:
    """(frequency, magnitude) of local maxima above threshold * global max,
    restricted to positive frequencies, ordered by magnitude.

    Peak positions are refined by three-point parabolic interpolation of the
    magnitude spectrum.
    """
    freqs = spectrum.frequencies
    mag = spectrum.magnitude()
    sel = freqs > 0
    f, m = freqs[sel], mag[sel]
    if len(m) < 3:
        return []
    peaks = []
    cutoff = threshold * m.max()
    for i in range(1, len(m) - 1):
        if m[i] >= m[i - 1] and m[i] >= m[i + 1] and m[i] >= cutoff:
            denom = m[i - 1] - 2 * m[i] + m[i + 1]
            shift = 0.0 if denom == 0 else 0.5 * (m[i - 1] - m[i + 1]) / denom
            shift = float(np.clip(shift, -0.5, 0.5))
            df = f[1] - f[0]
            peaks.append((float(f[i] + shift * df), float(m[i])))
    peaks.sort(key=lambda p: -p[1])
    return peaks[:max_peaks]


# ---------------------------------------------------------------------------
# sinusoid fitting with BIC model selection


def _fit_modes(times, values, weights, freqs0, amps0, bin_width,
               restarts: int = 5, seed: int = 0):
    """Weighted NLS fit of sum_e a_e sin(w_e t) with bounded multi-start."""
    k = len(freqs0)
    rng = np.random.default_rng(seed)

    def residuals(params):
        w = params[:k]
        a = params[k:]
        model = np.sin(np.outer(times, w)) @ a
        return (model - values) * weights

    best = None
    starts = [np.zeros(k)]
    starts += [rng.uniform(-1, 1, size=k) for _ in range(restarts - 1)]
    for jitter in starts:
        w_start = np.clip(freqs0 + jitter * bin_width, 1e-6, None)
        p0 = np.concatenate([w_start, amps0])
        lower = np.concatenate([np.maximum(freqs0 - bin_width, 0.0),
                                -np.inf * np.ones(k)])
        upper = np.concatenate([freqs0 + bin_width, np.inf * np.ones(k)])
        try:
            res = least_squares(residuals, p0, bounds=(lower, upper),
                                max_nfev=2000)
        except ValueError:
            continue
        chi2 = float(2 * res.cost)
        if best is None or chi2 < best[0]:
            best = (chi2, res.x)
    if best is None:
        raise RuntimeError("sinusoid fit failed to converge")
    chi2, params = best
    return params[:k], params[k:], chi2


def _seed_amplitudes(times, values, weights, freqs):
    """Weighted linear solve for amplitudes at fixed frequencies."""
    basis = np.sin(np.outer(times, freqs))
    W = weights[:, None]
    sol, *_ = np.linalg.lstsq(basis * W, values * weights, rcond=None)
    return sol


def fit_sinusoids_bic(trace: GreenTrace, max_modes: int = 6,
                      peak_threshold: float = 0.05, restarts: int = 5,
                      seed: int = 0) -> SpectralModel:
    """Fit 1..max_modes sines and keep the model minimizing the BIC.

    Candidate frequencies warm-start from the dominant DFT peaks of the
    symmetrized transform; each mode's frequency may move by at most one
    frequency bin during the fit.  Weights come from the trace's standard
    errors; BIC = chi^2 + k ln(n) with k = 2 * modes for the Gaussian
    likelihood with known per-point variances.
    """
    if max_modes < 1:
        raise ValueError("max_modes must be at least 1")
    times = trace.times
    values = np.asarray(trace.values, dtype=float)
    if np.iscomplexobj(trace.values):
        raise ValueError("sinusoid fitting expects a real trace")
    n = len(times)
    errs = np.where(trace.std_errors > 0, trace.std_errors,
                    max(np.max(trace.std_errors), 1e-12))
    weights = 1.0 / errs
    spectrum = fourier_time(trace, window="symmetrized")
    peaks = dominant_peaks(spectrum, threshold=peak_threshold)
    if not peaks:
        raise ValueError("no spectral peaks above threshold; nothing to fit")
    bin_width = float(spectrum.frequencies[1] - spectrum.frequencies[0])
    candidates = np.array([p[0] for p in peaks])
    best_model = None
    for k in range(1, min(max_modes, len(candidates)) + 1):
        if 2 * k >= n:
            break
        freqs0 = candidates[:k]
        amps0 = _seed_amplitudes(times, values, weights, freqs0)
        try:
            freqs, amps, chi2 = _fit_modes(times, values, weights, freqs0,
                                           amps0, bin_width, restarts, seed)
        except RuntimeError:
            continue
        bic = chi2 + 2 * k * np.log(n)
        model = SpectralModel(freqs, amps, float(bic), float(chi2))
        if best_model is None or model.bic < best_model.bic:
            best_model = model
    if best_model is None:
        raise RuntimeError("sinusoid fit failed for every candidate count")
    return best_model


# ---------------------------------------------------------------------------
# dynamical structure factor


def assemble_dsf(models: Sequence[SpectralModel], length: int, sigma: float,
                 omega_grid: Optional[np.ndarray] = None,
                 n_omega: int = 400) -> DSFGrid:
    """S(q, omega) = sum_{r,e} a_{r,e} cos(q r) G_sigma(omega - omega_e),
    on q = 2 pi k / L for k in [0, L), normalized to a maximum of 1.

    `models` holds one fitted model per site r in [0, L).  Gaussians are
    normalized; tiny negative excursions from fit noise are clipped so the
    normalized intensities stay non-negative.
    """
    if len(models) != length:
        raise ValueError(f"need one model per site: got {len(models)} for L={length}")
    if sigma <= 0:
        raise ValueError("broadening sigma must be positive")
    all_freqs = np.concatenate([m.frequencies for m in models])
    if omega_grid is None:
        top = float(all_freqs.max()) if all_freqs.size else 1.0
        omega_grid = np.linspace(0.0, 1.2 * top + 4 * sigma, n_omega)
    qs = 2 * np.pi * np.arange(length) / length
    grid = np.zeros((length, len(omega_grid)))
    norm = 1.0 / (sigma * np.sqrt(2 * np.pi))
    for r, model in enumerate(models):
        cos_qr = np.cos(qs * r)
        for w, a in zip(model.frequencies, model.amplitudes):
            gauss = norm * np.exp(-0.5 * ((omega_grid - w) / sigma) ** 2)
            grid += a * np.outer(cos_qr, gauss)
    grid = np.clip(grid, 0.0, None)
    peak = grid.max()
    if peak > 0:
        grid /= peak
    return DSFGrid(qs, np.asarray(omega_grid, dtype=float), grid, sigma)


def lehmann_models(spectral_data, kick, observables, magnitude_floor=1e-10):
    """Exact per-site SpectralModels from Lehmann overlaps (no fitting)."""
    from .models import lehmann_overlaps

    models = []
    for obs in observables:
        ov = lehmann_overlaps(spectral_data, obs, kick)
        sel = (np.abs(ov.a) > magnitude_floor) & (ov.omegas > magnitude_floor)
        # merge near-degenerate frequencies into single modes
        freqs, amps = [], []
        for w, a in sorted(zip(ov.omegas[sel], ov.a[sel])):
            if freqs and abs(w - freqs[-1]) < 1e-8:
                amps[-1] += a
            else:
                freqs.append(w)
                amps.append(a)
        keep = [i for i, a in enumerate(amps) if abs(a) > magnitude_floor]
        models.append(SpectralModel(
            np.array([freqs[i] for i in keep]),
            np.array([amps[i] for i in keep]),
            bic=float("nan"), residual_chi2=0.0,
        ))
    return models
