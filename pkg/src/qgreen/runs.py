"""Experiment orchestration: ground state -> estimator -> post-processing,
with reproducible delimited outputs, figures and a hashed manifest.

Every numeric column is printed with 17 significant digits, so rerunning a
config with the same seed reproduces the files byte for byte.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .circuits import build_scp_template
from .config import ConfigError, RunConfig
from .estimators import (
    EstimatorConfig,
    GreenTrace,
    VarianceModel,
    estimate_fermionic_gf,
    estimate_scp,
    fd_trace,
    lcp_point_variance,
    lcp_trace,
    predicted_variance,
    scp_gradient_samples,
    shift_trace,
)
from .models import (
    TrotterPlan,
    build_heisenberg_terms,
    ground_state_exact,
    hubbard_ground_state,
)
from .oracle import (
    exact_fermionic_gf,
    exact_fermionic_trotter_gf,
    exact_lcp_reference_trace,
    exact_rgf_spectral,
    exact_scp_reference_trace,
    exact_trotter_gradient,
)
from .pauli import PauliString
from .spectra import assemble_dsf, fit_sinusoids_bic, lehmann_models
from .statevec import RngStream


class NumericalError(RuntimeError):
    """A run failed for numerical reasons (fit divergence etc.)."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trace_csv(path: Path, trace: GreenTrace) -> None:
    with open(path, "w") as fh:
        fh.write("t,value,stderr\n")
        for t, v, e in zip(trace.times, trace.values, trace.std_errors):
            fh.write(f"{_fmt(t)},{_fmt(float(np.real(v)))},{_fmt(e)}\n")


def write_complex_trace_csv(base: Path, trace: GreenTrace) -> list[Path]:
    """Complex traces split into *_real.csv / *_imag.csv with the same schema."""
    paths = []
    errs_im = trace.std_errors_imag
    if errs_im is None:
        errs_im = trace.std_errors
    for suffix, vals, errs in (
        ("real", trace.values.real, trace.std_errors),
        ("imag", trace.values.imag, errs_im),
    ):
        p = base.with_name(base.name + f"_{suffix}.csv")
        with open(p, "w") as fh:
            fh.write("t,value,stderr\n")
            for t, v, e in zip(trace.times, vals, errs):
                fh.write(f"{_fmt(t)},{_fmt(v)},{_fmt(e)}\n")
        paths.append(p)
    return paths


def write_dsf_csv(path: Path, grid) -> None:
    with open(path, "w") as fh:
        fh.write("q,omega,intensity\n")
        for i, q in enumerate(grid.q_values):
            for j, w in enumerate(grid.omega_values):
                fh.write(f"{_fmt(q)},{_fmt(w)},{_fmt(grid.intensities[i, j])}\n")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, command: str, config: RunConfig,
                   files: Sequence[Path]) -> Path:
    manifest = {
        "schema": 1,
        "command": command,
        "package_version": __version__,
        "seed": config.seed,
        "config": config.to_dict(),
        "outputs": [
            {"path": str(p.relative_to(out)), "sha256": _sha256(p)}
            for p in sorted(files)
        ],
    }
    path = out / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _prepare(config: RunConfig, out_dir: Optional[str]) -> Path:
    out = Path(out_dir if out_dir is not None else config.outputs)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _heisenberg_context(config: RunConfig):
    spec = config.spin_spec()
    terms = build_heisenberg_terms(spec)
    state, data = ground_state_exact(terms)
    obs_cfg = config.observables()
    kick = PauliString.single(spec.length, obs_cfg["kick_site"],
                              obs_cfg["kick_axis"].upper())
    observables = [
        PauliString.single(spec.length, r, obs_cfg["measure_axis"].upper())
        for r in obs_cfg["measure_sites"]
    ]
    return spec, terms, state, data, kick, observables, obs_cfg


def _maybe_plots(enabled: bool):
    if not enabled:
        return None
    from . import plots

    return plots


# ---------------------------------------------------------------------------
# commands


def run_ground_state(config: RunConfig, out_dir: Optional[str] = None,
                     plots: bool = True) -> Path:
    out = _prepare(config, out_dir)
    files = []
    info: dict = {"model": config.model_kind}
    if config.model_kind == "heisenberg":
        _, terms, state, data, *_ = _heisenberg_context(config)
        info["energy"] = data.ground_energy
        info["n_qubits"] = terms.n_qubits
        spath = out / "spectrum.csv"
        with open(spath, "w") as fh:
            fh.write("index,energy\n")
            for i, e in enumerate(data.eigenvalues):
                fh.write(f"{i},{_fmt(e)}\n")
        files.append(spath)
    else:
        spec = config.hubbard_spec()
        state, energy, lam = hubbard_ground_state(spec)
        info.update(energy=energy, n_qubits=spec.n_qubits, parity=lam,
                    filling=spec.sites)
    gpath = out / "ground_state.json"
    with open(gpath, "w") as fh:
        json.dump(info, fh, indent=2, sort_keys=True)
    files.append(gpath)
    files.append(write_manifest(out, "ground-state", config, files))
    return out


def _shot_split(total_shots: int, steps: int) -> int:
    """Per-evaluation budget when one total budget covers every time point."""
    return max(1, int(np.ceil(total_shots / steps)))


def run_lcp(config: RunConfig, out_dir: Optional[str] = None,
            plots: bool = True) -> Path:
    return _run_shift_command(config, out_dir, plots, "lcp")


def run_fd(config: RunConfig, out_dir: Optional[str] = None,
           plots: bool = True) -> Path:
    return _run_shift_command(config, out_dir, plots, "fd")


def _run_shift_command(config, out_dir, plots_enabled, kind: str) -> Path:
    if config.model_kind != "heisenberg":
        raise ConfigError(
            f"config.estimator.mode: {kind} traces need quadrature handling on "
            "fermions; use mode=scp for the hubbard model"
        )
    if config.noise() is not None:
        raise ConfigError(
            "config.noise: noisy shift traces are not supported; noise studies "
            "run through the scp estimator"
        )
    out = _prepare(config, out_dir)
    spec, terms, state, data, kick, observables, obs_cfg = _heisenberg_context(config)
    plan = config.plan()
    est = config.estimator()
    shots = _shot_split(est.total_shots, plan.steps)
    rng = RngStream(config.seed)
    pl = _maybe_plots(plots_enabled)
    files = []
    for i, obs in enumerate(observables):
        if kind == "lcp":
            tr = lcp_trace(terms, plan, kick, obs, state.amplitudes, shots,
                           rng.substream(i))
        else:
            tr = fd_trace(terms, plan, kick, obs, state.amplitudes, est.epsilon,
                          shots, rng.substream(i))
        ref = exact_lcp_reference_trace(plan, terms, kick, obs, state.amplitudes)
        R = obs_cfg["measure_sites"][i]
        stem = (f"trace_{kind}_{obs_cfg['measure_axis']}{obs_cfg['kick_axis']}"
                f"_R{R}_r{obs_cfg['kick_site']}")
        p = out / f"{stem}.csv"
        write_trace_csv(p, tr)
        files.append(p)
        if pl:
            fig = out / f"{stem}.png"
            pl.plot_trace(tr, ref, fig)
            files.append(fig)
    files.append(write_manifest(out, kind, config, files))
    return out


def run_scp(config: RunConfig, out_dir: Optional[str] = None,
            plots: bool = True) -> Path:
    out = _prepare(config, out_dir)
    est = config.estimator()
    rng = RngStream(config.seed)
    pl = _maybe_plots(plots)
    files = []
    if config.model_kind == "heisenberg":
        spec, terms, state, data, kick, observables, obs_cfg = _heisenberg_context(config)
        plan = config.plan()
        tmpl = build_scp_template(plan, terms, kick, tuple(observables),
                                  noise=config.noise())
        tmpl = tmpl.with_initial_state(state.amplitudes)
        traces = estimate_scp(tmpl, est, rng)
        if isinstance(traces, GreenTrace):
            traces = [traces]
        for i, tr in enumerate(traces):
            R = obs_cfg["measure_sites"][i]
            stem = (f"trace_scp_{obs_cfg['measure_axis']}{obs_cfg['kick_axis']}"
                    f"_R{R}_r{obs_cfg['kick_site']}")
            p = out / f"{stem}.csv"
            write_trace_csv(p, tr)
            files.append(p)
            if pl:
                ref = exact_scp_reference_trace(plan, terms, kick,
                                                observables[i], state.amplitudes)
                fig = out / f"{stem}.png"
                pl.plot_trace(tr, ref, fig)
                files.append(fig)
    else:
        spec = config.hubbard_spec()
        obs_cfg = config.observables()
        plan = config.plan()
        tr = estimate_fermionic_gf(spec, obs_cfg["site_R"], obs_cfg["site_r"],
                                   plan, est, rng, species=obs_cfg["species"],
                                   noise=config.noise())
        stem = f"trace_scp_fermi_R{obs_cfg['site_R']}_r{obs_cfg['site_r']}"
        files.extend(write_complex_trace_csv(out / stem, tr))
        if pl:
            ref = exact_fermionic_trotter_gf(spec, obs_cfg["site_R"],
                                             obs_cfg["site_r"], plan,
                                             species=obs_cfg["species"])
            fig = out / f"{stem}.png"
            pl.plot_complex_trace(tr, ref, fig)
            files.append(fig)
    files.append(write_manifest(out, "scp", config, files))
    return out


def run_dsf(config: RunConfig, out_dir: Optional[str] = None,
            plots: bool = True) -> Path:
    if config.model_kind != "heisenberg":
        raise ConfigError("config.model.kind: the dsf command runs on spin chains")
    spec = config.spin_spec()
    if spec.length < 2:
        raise ConfigError("config.model.length: DSF requires at least 2 sites")
    out = _prepare(config, out_dir)
    opts = config.dsf_options()
    terms = build_heisenberg_terms(spec)
    state, data = ground_state_exact(terms)
    obs_cfg = config.observables()
    kick = PauliString.single(spec.length, obs_cfg["kick_site"],
                              obs_cfg["kick_axis"].upper())
    observables = [
        PauliString.single(spec.length, r, obs_cfg["measure_axis"].upper())
        for r in range(spec.length)
    ]
    pl = _maybe_plots(plots)
    files = []
    if opts["oracle_mode"]:
        models = lehmann_models(data, kick, observables)
    else:
        plan = config.plan()
        est = config.estimator()
        tmpl = build_scp_template(plan, terms, kick, tuple(observables),
                                  noise=config.noise())
        tmpl = tmpl.with_initial_state(state.amplitudes)
        traces = estimate_scp(tmpl, est, RngStream(config.seed))
        models = []
        for r, tr in enumerate(traces):
            stem = (f"trace_scp_{obs_cfg['measure_axis']}{obs_cfg['kick_axis']}"
                    f"_R{r}_r{obs_cfg['kick_site']}")
            p = out / f"{stem}.csv"
            write_trace_csv(p, tr)
            files.append(p)
            try:
                models.append(fit_sinusoids_bic(tr, max_modes=opts["max_modes"],
                                                seed=config.seed))
            except (RuntimeError, ValueError) as exc:
                raise NumericalError(f"sinusoid fit failed for site {r}: {exc}")
    grid = assemble_dsf(models, spec.length, float(opts["sigma"]),
                        n_omega=opts["n_omega"])
    gpath = out / "dsf_grid.csv"
    write_dsf_csv(gpath, grid)
    files.append(gpath)
    mpath = out / "dsf_models.json"
    with open(mpath, "w") as fh:
        json.dump(
            [
                {
                    "site": r,
                    "frequencies": [float(v) for v in m.frequencies],
                    "amplitudes": [float(v) for v in m.amplitudes],
                    "bic": None if np.isnan(m.bic) else float(m.bic),
                    "residual_chi2": float(m.residual_chi2),
                }
                for r, m in enumerate(models)
            ],
            fh, indent=2,
        )
    files.append(mpath)
    if pl:
        fig = out / "dsf_grid.png"
        pl.plot_dsf(grid, fig)
        files.append(fig)
    files.append(write_manifest(out, "dsf", config, files))
    return out


def scp_empirical_component_variance(terms, plan, kick, obs, psi0, est, rng):
    """Mean over components of the empirical Var[g^(k)] from one SCP run."""
    tmpl = build_scp_template(plan, terms, kick, obs)
    tmpl = tmpl.with_initial_state(psi0)
    _, samples = scp_gradient_samples(tmpl, est, rng)
    P = est.perturbations
    return float(np.mean(samples[0].var(axis=0, ddof=1) / P))


def run_variance_study(config: RunConfig, out_dir: Optional[str] = None,
                       plots: bool = True) -> Path:
    if config.model_kind != "heisenberg":
        raise ConfigError("config.model.kind: the variance study runs on spin chains")
    out = _prepare(config, out_dir)
    opts = config.variance_options()
    spec, terms, state, data, kick, observables, obs_cfg = _heisenberg_context(config)
    obs = observables[0]
    plan = config.plan()
    est = config.estimator()
    total = est.total_shots
    eps = est.epsilon
    rng = RngStream(config.seed)
    rows: list[dict] = []

    # empirical variance vs total budget at S=1, with Eq.-level bounds
    dense = exact_trotter_gradient(plan, terms, kick, obs, state.amplitudes)
    norm_sq = float(np.sum(dense**2))
    comp_sq = float(np.mean(dense**2))
    for i, budget in enumerate(opts["budgets"]):
        cfg_b = EstimatorConfig(mode="scp", epsilon=eps, perturbations=budget)
        emp = scp_empirical_component_variance(
            terms, plan, kick, obs, state.amplitudes, cfg_b, rng.substream(i)
        )
        floor = (norm_sq - comp_sq) / budget
        cap = floor + 1.0 / (budget * eps**2)
        rows.append(dict(section="budget", total_shots=budget, s_value=1,
                         trotter_steps=plan.steps, empirical=emp,
                         predicted_floor=floor, predicted_c1=cap))

    # S-allocation study at fixed total budget
    for rep in range(opts["repeats"]):
        for S in opts["s_values"]:
            if total % S != 0:
                raise ConfigError(
                    "config.variance_study.s_values: each S must divide total_shots"
                )
            cfg_s = EstimatorConfig(mode="scp", epsilon=eps,
                                    perturbations=total // S,
                                    shots_per_perturbation=S)
            emp = scp_empirical_component_variance(
                terms, plan, kick, obs, state.amplitudes, cfg_s,
                rng.substream(1000 + 17 * rep + S),
            )
            rows.append(dict(section="s_alloc", total_shots=total, s_value=S,
                             trotter_steps=plan.steps, empirical=emp,
                             repeat=rep))

    # LCP/SCP mean-variance crossover vs the number of time points
    p_samples = int(opts["p_samples"])
    for j, N in enumerate(opts["trotter_grid"]):
        plan_n = TrotterPlan(plan.total_time, int(N))
        cfg_n = EstimatorConfig(mode="scp", epsilon=eps, perturbations=p_samples)
        # per-sample variance estimated once, rescaled by 1/P to the budget
        emp_scaled = scp_empirical_component_variance(
            terms, plan_n, kick, obs, state.amplitudes, cfg_n,
            rng.substream(2000 + j),
        ) * p_samples / total
        exact = shift_trace(terms, plan_n, kick, obs, state.amplitudes,
                            np.pi / 2, 2.0, None)
        s_r = _shot_split(total, int(N))
        # F(+pi/2) equals the point value by the equal-and-opposite symmetry
        lcp_var = float(np.mean([
            lcp_point_variance(float(m), 2 * s_r) for m in exact.values
        ]))
        dense_n = exact_trotter_gradient(plan_n, terms, kick, obs,
                                         state.amplitudes)
        pred = float(np.mean([
            predicted_variance(VarianceModel(1.0, total, 1, eps,
                                             float(np.sum(dense_n**2)),
                                             float(g**2)))
            for g in dense_n
        ]))
        rows.append(dict(section="crossover", total_shots=total, s_value=1,
                         trotter_steps=int(N), empirical=emp_scaled,
                         lcp_formula=lcp_var, predicted_c1=pred))

    cpath = out / "variance_study.csv"
    cols = ["section", "trotter_steps", "total_shots", "s_value", "repeat",
            "empirical", "lcp_formula", "predicted_floor", "predicted_c1"]
    with open(cpath, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(
                _fmt(row[c]) if isinstance(row.get(c), float) else str(row.get(c, ""))
                for c in cols
            ) + "\n")
    files = [cpath]

    cross = [r for r in rows if r["section"] == "crossover"]
    crossover_n = None
    for r in sorted(cross, key=lambda r: r["trotter_steps"]):
        if r["empirical"] < r["lcp_formula"]:
            crossover_n = r["trotter_steps"]
            break
    spath = out / "variance_summary.json"
    with open(spath, "w") as fh:
        json.dump({"crossover_steps": crossover_n}, fh, indent=2)
    files.append(spath)
    pl = _maybe_plots(plots)
    if pl:
        fig = out / "variance_study.png"
        pl.plot_variance_study(rows, fig)
        files.append(fig)
    files.append(write_manifest(out, "variance-study", config, files))
    return out


def run_oracle(config: RunConfig, out_dir: Optional[str] = None,
               plots: bool = True) -> Path:
    out = _prepare(config, out_dir)
    plan = config.plan()
    files = []
    pl = _maybe_plots(plots)
    if config.model_kind == "heisenberg":
        spec, terms, state, data, kick, observables, obs_cfg = _heisenberg_context(config)
        times = plan.tau * np.arange(1, plan.steps + 1)
        for i, obs in enumerate(observables):
            R = obs_cfg["measure_sites"][i]
            spectral = exact_rgf_spectral(data, obs, kick, times)
            trotter = exact_scp_reference_trace(plan, terms, kick, obs,
                                                state.amplitudes)
            for tag, tr in (("spectral", spectral), ("trotter", trotter)):
                p = out / (f"oracle_{tag}_{obs_cfg['measure_axis']}"
                           f"{obs_cfg['kick_axis']}_R{R}"
                           f"_r{obs_cfg['kick_site']}.csv")
                with open(p, "w") as fh:
                    fh.write("t,value,stderr\n")
                    for t, v in zip(tr.times, np.real(tr.values)):
                        fh.write(f"{_fmt(t)},{_fmt(v)},0\n")
                files.append(p)
    else:
        spec = config.hubbard_spec()
        obs_cfg = config.observables()
        trotter = exact_fermionic_trotter_gf(spec, obs_cfg["site_R"],
                                             obs_cfg["site_r"], plan,
                                             species=obs_cfg["species"])
        continuum = exact_fermionic_gf(spec, obs_cfg["site_R"],
                                       obs_cfg["site_r"], trotter.times,
                                       species=obs_cfg["species"])
        for tag, tr in (("trotter", trotter), ("spectral", continuum)):
            base = out / f"oracle_{tag}_fermi_R{obs_cfg['site_R']}_r{obs_cfg['site_r']}"
            fake = GreenTrace(tr.times, tr.values,
                              np.zeros(len(tr.times)),
                              std_errors_imag=np.zeros(len(tr.times)))
            files.extend(write_complex_trace_csv(base, fake))
    files.append(write_manifest(out, "oracle", config, files))
    return out
