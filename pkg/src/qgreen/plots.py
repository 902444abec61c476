"""Figure rendering for the report path: every CLI command drops PNGs next
to its delimited outputs (disable with --no-plots).

Rendering is deterministic: fixed figure geometry, no timestamps in the PNG
metadata.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_SAVE = dict(dpi=150, metadata={"Software": None})


def _style(ax, xlabel, ylabel):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.25, linewidth=0.5)


def plot_trace(trace, reference, path: Path) -> None:
    """Estimated trace with error bars; dashed reference curve if given."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.errorbar(trace.times, np.real(trace.values), yerr=trace.std_errors,
                fmt="o", ms=3, lw=0.8, capsize=2, label=trace.meta.get("estimator", "estimate"))
    if reference is not None:
        ax.plot(reference.times, np.real(reference.values), "--", color="m",
                lw=1.2, label=f"reference ({reference.source})")
    _style(ax, r"time separation $t\,[1/J]$", r"$\mathcal{G}(t)$")
    ax.legend(frameon=False, fontsize=9)
    obs = trace.meta.get("observable")
    if obs:
        ax.set_title(obs, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_complex_trace(trace, reference, path: Path) -> None:
    fig, axes = plt.subplots(2, 1, figsize=(6.4, 5.6), sharex=True)
    parts = (("Re", np.real, trace.std_errors),
             ("Im", np.imag, trace.std_errors_imag
              if trace.std_errors_imag is not None else trace.std_errors))
    for ax, (label, take, errs) in zip(axes, parts):
        ax.errorbar(trace.times, take(trace.values), yerr=errs, fmt="o", ms=3,
                    lw=0.8, capsize=2, label=f"{label} estimate")
        if reference is not None:
            ax.plot(reference.times, take(reference.values), "--", color="m",
                    lw=1.2, label=f"{label} reference")
        _style(ax, "", rf"{label}$\,\mathcal{{G}}(t)$")
        ax.legend(frameon=False, fontsize=9)
    axes[-1].set_xlabel(r"time separation $t\,[1/J]$")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_spectrum(spectrum, path: Path, peaks=None) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    sel = spectrum.frequencies >= 0
    ax.plot(spectrum.frequencies[sel], spectrum.magnitude()[sel], lw=1.0)
    if peaks:
        for f, m in peaks:
            ax.axvline(f, color="m", ls="--", lw=0.7)
    _style(ax, r"$\omega\,[J]$", "amplitude")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_dsf(grid, path: Path, rescale: bool = True, band=None) -> None:
    """Intensity map; frequencies rescaled by 2 pi / max(omega_e) for display
    only (stored data stays in J units).  `band` may hold (omega_low(q),
    omega_high(q)) overlay curves."""
    fig, ax = plt.subplots(figsize=(6.0, 4.4))
    omega = grid.omega_values
    scale = 2 * np.pi / omega.max() if (rescale and omega.max() > 0) else 1.0
    q = np.append(grid.q_values, 2 * np.pi)
    intens = np.vstack([grid.intensities, grid.intensities[:1]])
    mesh = ax.pcolormesh(q, omega * scale, intens.T, shading="auto",
                         cmap="magma")
    if band is not None:
        low, high = band
        ax.plot(grid.q_values, np.asarray(low) * scale, "m--", lw=1.0)
        ax.plot(grid.q_values, np.asarray(high) * scale, "m--", lw=1.0)
    fig.colorbar(mesh, ax=ax, label="normalized intensity")
    _style(ax, r"$q$", r"$\omega$ (rescaled)" if rescale else r"$\omega\,[J]$")
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def plot_variance_study(rows, path: Path) -> None:
    budget = [r for r in rows if r["section"] == "budget"]
    s_alloc = [r for r in rows if r["section"] == "s_alloc"]
    cross = [r for r in rows if r["section"] == "crossover"]
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6))

    if budget:
        x = [r["total_shots"] for r in budget]
        axes[0].loglog(x, [r["empirical"] for r in budget], "o-", label="empirical")
        axes[0].loglog(x, [r["predicted_c1"] for r in budget], "--",
                       label=r"saturated bound")
        axes[0].loglog(x, [max(r["predicted_floor"], 1e-16) for r in budget],
                       ":", label="first-term floor")
        _style(axes[0], "total shots", "mean gradient variance")
        axes[0].legend(frameon=False, fontsize=8)

    if s_alloc:
        svals = sorted({r["s_value"] for r in s_alloc})
        means = [np.mean([r["empirical"] for r in s_alloc if r["s_value"] == s])
                 for s in svals]
        axes[1].semilogx(svals, means, "o-")
        _style(axes[1], "shots per perturbation S", "mean gradient variance")

    if cross:
        cross = sorted(cross, key=lambda r: r["trotter_steps"])
        x = [r["trotter_steps"] for r in cross]
        axes[2].semilogy(x, [r["empirical"] for r in cross], "o-", label="SCP")
        axes[2].semilogy(x, [r["lcp_formula"] for r in cross], "s-", label="LCP")
        axes[2].semilogy(x, [r["predicted_c1"] for r in cross], "--",
                         label="SCP bound")
        _style(axes[2], "time points N", "mean variance per point")
        axes[2].legend(frameon=False, fontsize=8)

    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)
