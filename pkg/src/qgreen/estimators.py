"""Green's-function estimators: finite differences, the parameter-shift
(local circuit perturbation) rule, and the stochastic simultaneous
perturbation estimator, plus their shot-variance models.

All estimators sample single +-1 Pauli outcomes.  For a fixed noiseless
circuit the outcomes are iid Bernoulli draws from the exact expectation, so
multi-shot means are drawn binomially from one statevector evolution; noisy
circuits are re-evolved per trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .circuits import (
    CircuitTemplate,
    build_fermionic_kick,
    build_lcp_template,
    build_scp_template,
    parity_conjugated_observable,
)
from .engine import CompiledTemplate
from .models import (
    HamiltonianTerms,
    HubbardSpec,
    TrotterPlan,
    build_hubbard_terms_jw,
    hubbard_ground_state,
)
from .pauli import PauliString
from .statevec import NoiseSpec, RngStream


@dataclass(frozen=True)
class EstimatorConfig:
    """Shot-budget layout: S_total = perturbations x shots_per_perturbation."""

    mode: str = "scp"
    epsilon: float = 0.1
    perturbations: int = 1
    shots_per_perturbation: int = 1
    reindex_time: bool = True

    def __post_init__(self):
        if self.mode not in ("fd", "lcp", "scp"):
            raise ValueError(f"unknown estimator mode {self.mode!r}")
        if self.mode in ("fd", "scp") and not self.epsilon > 0:
            raise ValueError("epsilon must be positive for fd/scp")
        if self.perturbations < 1 or self.shots_per_perturbation < 1:
            raise ValueError("perturbations and shots must be at least 1")

    @property
    def total_shots(self) -> int:
        return self.perturbations * self.shots_per_perturbation


@dataclass
class GreenTrace:
    """Time grid, estimates and per-point standard errors."""

    times: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    meta: dict = field(default_factory=dict)
    std_errors_imag: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values)
        self.std_errors = np.asarray(self.std_errors, dtype=float)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.std_errors < 0):
            raise ValueError("standard errors must be non-negative")

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)


class PointEstimate(NamedTuple):
    value: float
    std_error: float
    f_plus: float
    f_minus: float


def _binomial_mean(m: float, shots: int, rng: RngStream) -> float:
    """Mean of `shots` iid +-1 outcomes with P(+1) = (1+m)/2."""
    p = min(1.0, max(0.0, (1.0 + m) / 2.0))
    k = rng.generator.binomial(shots, p)
    return (2.0 * k - shots) / shots


def _sampled_shift_means(template: CircuitTemplate, magnitude: float,
                         shots: Optional[int], rng: Optional[RngStream]
                         ) -> tuple[float, float]:
    """F(+magnitude), F(-magnitude) of a single-slot template.

    shots=None returns exact expectations.  Noiseless shot estimates reuse a
    single evolution per shift; noisy ones run per-shot trajectories.
    """
    if template.n_slots != 1:
        raise ValueError("shift evaluation needs exactly one slot")
    compiled = CompiledTemplate(template, magnitude)
    noisy = template.noise is not None and template.noise.gamma > 0
    if shots is None:
        if noisy:
            raise ValueError("exact expectations are unavailable under noise")
        m = compiled.run(_psi0_required(template), _pm_signs(1), "exact", None)
        return float(m[0, 0]), float(m[0, 1])
    if not shots >= 1:
        raise ValueError("shots must be at least 1")
    if noisy:
        signs = np.repeat(_pm_signs(1), shots, axis=0)
        outcomes = compiled.run(_psi0_required(template), signs, "sample", rng)
        return (
            float(outcomes[0, :shots].mean()),
            float(outcomes[0, shots:].mean()),
        )
    m = compiled.run(_psi0_required(template), _pm_signs(1), "exact", None)
    return (
        _binomial_mean(float(m[0, 0]), shots, rng),
        _binomial_mean(float(m[0, 1]), shots, rng),
    )


def _pm_signs(n_slots: int) -> np.ndarray:
    s = np.ones((2, n_slots), dtype=np.int8)
    s[1] *= -1
    return s


def _psi0_required(template: CircuitTemplate) -> np.ndarray:
    if template.initial_state is None:
        raise ValueError("template has no attached initial state")
    return template.initial_state


def estimate_lcp(template: CircuitTemplate, shots: Optional[int],
                 rng: Optional[RngStream] = None) -> PointEstimate:
    """Parameter-shift estimate (F(pi/2) - F(-pi/2))/2 of one RGF point.

    Each shift evaluation receives the full `shots` budget; shots=None gives
    the exact (zero-shot-noise) value.  The standard error comes from the
    binomial variance (1 - F^2)/shots of each +-1 sample mean.
    """
    fp, fm = _sampled_shift_means(template, np.pi / 2, shots, rng)
    value = 0.5 * (fp - fm)
    if shots is None:
        return PointEstimate(value, 0.0, fp, fm)
    var = 0.25 * ((1.0 - fp * fp) + (1.0 - fm * fm)) / shots
    return PointEstimate(value, float(np.sqrt(max(var, 0.0))), fp, fm)


def estimate_fd(template: CircuitTemplate, epsilon: float, shots: Optional[int],
                rng: Optional[RngStream] = None) -> PointEstimate:
    """Symmetric finite-difference estimate [F(+eps/2) - F(-eps/2)]/eps.

    Carries an O(eps^2) bias relative to the exact derivative; epsilon above
    ~0.5 rad is rejected as numerically unreasonable only by warning-free
    convention (the caller owns the trade-off), epsilon=0 is an error.
    """
    if epsilon == 0:
        raise ValueError("epsilon must be nonzero")
    fp, fm = _sampled_shift_means(template, abs(epsilon) / 2, shots, rng)
    value = (fp - fm) / abs(epsilon)
    if shots is None:
        return PointEstimate(value, 0.0, fp, fm)
    var = ((1.0 - fp * fp) + (1.0 - fm * fm)) / (epsilon * epsilon * shots)
    return PointEstimate(value, float(np.sqrt(max(var, 0.0))), fp, fm)


# ---------------------------------------------------------------------------
# SCP


def scp_gradient_samples(template: CircuitTemplate, config: EstimatorConfig,
                         rng: RngStream, etas: Optional[np.ndarray] = None,
                         exact: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Per-perturbation gradient samples for every observable.

    Returns (etas, samples) with samples[o, p, k] =
    (E+_p - E-_p) / (2 eps) * eta_p[k] for observable o.  E+-_p are means of
    S single-shot outcomes of the +-eps*eta_p circuits (exact expectations
    when exact=True).
    """
    P, S, eps = config.perturbations, config.shots_per_perturbation, config.epsilon
    N = template.n_slots
    if etas is None:
        etas = (1 - 2 * rng.generator.integers(0, 2, size=(P, N))).astype(np.int8)
    else:
        etas = np.asarray(etas, dtype=np.int8)
        if etas.shape != (P, N):
            raise ValueError(f"etas must have shape {(P, N)}")
    noisy = template.noise is not None and template.noise.gamma > 0
    compiled = CompiledTemplate(template, eps)
    psi0 = _psi0_required(template)
    n_obs = len(template.observables)

    if exact:
        signs = np.empty((2 * P, N), dtype=np.int8)
        signs[0::2] = etas
        signs[1::2] = -etas
        m = compiled.run(psi0, signs, "exact", rng)
        e_plus, e_minus = m[:, 0::2], m[:, 1::2]
    elif noisy or S == 1:
        # one trajectory per circuit run; commuting observables share each
        # shot's sampled bitstring
        signs = np.empty((2 * P * S, N), dtype=np.int8)
        signs[0::2] = np.repeat(etas, S, axis=0)
        signs[1::2] = -np.repeat(etas, S, axis=0)
        outcomes = compiled.run(psi0, signs, "sample", rng)
        e_plus = outcomes[:, 0::2].reshape(n_obs, P, S).mean(axis=2)
        e_minus = outcomes[:, 1::2].reshape(n_obs, P, S).mean(axis=2)
    else:
        # noiseless S > 1: the S outcomes of a fixed circuit are iid draws
        # from the exact expectation, so one evolution feeds a binomial
        # (per-observable marginals exact; used by single-observable studies)
        signs = np.empty((2 * P, N), dtype=np.int8)
        signs[0::2] = etas
        signs[1::2] = -etas
        m = compiled.run(psi0, signs, "exact", rng)
        p_plus = np.clip((1.0 + m[:, 0::2]) / 2.0, 0.0, 1.0)
        p_minus = np.clip((1.0 + m[:, 1::2]) / 2.0, 0.0, 1.0)
        e_plus = (2.0 * rng.generator.binomial(S, p_plus) - S) / S
        e_minus = (2.0 * rng.generator.binomial(S, p_minus) - S) / S

    diff = (e_plus - e_minus) / (2.0 * eps)  # (n_obs, P)
    samples = diff[:, :, None] * etas[None, :, :]  # (n_obs, P, N)
    return etas, samples


def estimate_scp(template: CircuitTemplate, config: EstimatorConfig,
                 rng: RngStream, etas: Optional[np.ndarray] = None,
                 exact: bool = False):
    """Full-trace SCP estimate from a single circuit template.

    Gradient component k (perturbation time k*tau) is reported against the
    time separation T - k*tau, so the returned grid runs over tau..T
    (config.reindex_time=False keeps raw component order for debugging).
    Returns one GreenTrace per observable (a bare GreenTrace if there is
    exactly one).
    """
    if config.perturbations < 2:
        raise ValueError("need at least 2 perturbation vectors for a variance")
    if template.plan is None:
        raise ValueError("template carries no Trotter plan")
    _, samples = scp_gradient_samples(template, config, rng, etas, exact)
    P = config.perturbations
    grad = samples.mean(axis=1)  # (n_obs, N)
    stderr = samples.std(axis=1, ddof=1) / np.sqrt(P)
    tau, N = template.plan.tau, template.plan.steps
    traces = []
    for o, obs in enumerate(template.observables):
        meta = {
            "estimator": "scp",
            "observable": obs.label(),
            "epsilon": config.epsilon,
            "perturbations": P,
            "shots_per_perturbation": config.shots_per_perturbation,
            "reindexed": config.reindex_time,
        }
        if config.reindex_time:
            times = tau * np.arange(1, N + 1)  # separations T - k*tau, ascending
            values = grad[o, ::-1].copy()
            errs = stderr[o, ::-1].copy()
        else:
            times = tau * np.arange(N)  # raw perturbation times k*tau
            values = grad[o].copy()
            errs = stderr[o].copy()
        traces.append(GreenTrace(times, values, errs, meta))
    return traces[0] if len(traces) == 1 else traces


def shift_trace(terms: HamiltonianTerms, plan: TrotterPlan, kick: PauliString,
                obs: PauliString, psi0: np.ndarray, magnitude: float,
                denominator: float, shots_per_point: Optional[int],
                rng: Optional[RngStream] = None, label: str = "lcp") -> GreenTrace:
    """Two-shift trace over separations tau..T: the point at j*tau kicks at
    time 0 and measures after j Trotter steps (no pre-kick evolution).

    Both shift circuits share evolution prefixes, so the exact expectations
    for all N points come from two stepwise trajectories; shots are then
    drawn per point with the full per-point budget on each shift.
    value(j) = [F_j(+magnitude) - F_j(-magnitude)] / denominator.
    """
    from .statevec import StateVector, apply_gate, expectation_pauli

    tmpl = build_lcp_template(plan, terms, kick, 0, obs)
    fplus = np.empty(plan.steps)
    fminus = np.empty(plan.steps)
    for sign, store in ((1, fplus), (-1, fminus)):
        sv = StateVector(terms.n_qubits, psi0)
        apply_gate(sv, tmpl.slot_gate(tmpl.slots[0], sign * magnitude))
        for j in range(plan.steps):
            for g in tmpl.step_gates:
                apply_gate(sv, g)
            store[j] = float(expectation_pauli(sv, obs))
    times = plan.tau * np.arange(1, plan.steps + 1)
    if shots_per_point is None:
        values = (fplus - fminus) / denominator
        errs = np.zeros_like(values)
    else:
        mp = np.array([_binomial_mean(m, shots_per_point, rng) for m in fplus])
        mm = np.array([_binomial_mean(m, shots_per_point, rng) for m in fminus])
        values = (mp - mm) / denominator
        errs = np.sqrt(((1 - mp**2) + (1 - mm**2)) / shots_per_point) / denominator
    meta = {"estimator": label, "observable": obs.label(),
            "shots_per_point": shots_per_point}
    return GreenTrace(times, values, errs, meta)


def lcp_trace(terms: HamiltonianTerms, plan: TrotterPlan, kick: PauliString,
              obs: PauliString, psi0: np.ndarray, shots_per_point: Optional[int],
              rng: Optional[RngStream] = None) -> GreenTrace:
    """Parameter-shift trace: (F(+pi/2) - F(-pi/2))/2 per time point."""
    return shift_trace(terms, plan, kick, obs, psi0, np.pi / 2, 2.0,
                       shots_per_point, rng, label="lcp")


def fd_trace(terms: HamiltonianTerms, plan: TrotterPlan, kick: PauliString,
             obs: PauliString, psi0: np.ndarray, epsilon: float,
             shots_per_point: Optional[int],
             rng: Optional[RngStream] = None) -> GreenTrace:
    """Symmetric finite-difference trace: [F(+eps/2) - F(-eps/2)]/eps."""
    if epsilon == 0:
        raise ValueError("epsilon must be nonzero")
    return shift_trace(terms, plan, kick, obs, psi0, abs(epsilon) / 2,
                       abs(epsilon), shots_per_point, rng, label="fd")


# ---------------------------------------------------------------------------
# fermions


QUADRATURE_PAIRS = [("x", "x"), ("x", "y"), ("y", "x"), ("y", "y")]


def estimate_fermionic_gf(spec: HubbardSpec, site_R: int, site_r: int,
                          plan: TrotterPlan, config: EstimatorConfig,
                          rng: RngStream, species: str = "up",
                          noise: NoiseSpec | None = None,
                          exact: bool = False) -> GreenTrace:
    """Anticommutator Green's function -i<{a_R(T), a†_r(t)}> via quadrature kicks.

    Runs SCP for the four (response u, kick v) quadrature pairs, measuring
    the parity-conjugated observables, and recombines
    G = (lambda/2) [(est_xy + est_yx) - i(est_xx - est_yy)], with lambda the
    ground-state parity eigenvalue (computed classically).  The total shot
    budget splits evenly over the four circuit families.
    """
    terms = build_hubbard_terms_jw(spec)
    psi0, _, lam = hubbard_ground_state(spec)
    per_family = max(2, config.perturbations // len(QUADRATURE_PAIRS))
    fam_config = EstimatorConfig(
        mode="scp", epsilon=config.epsilon, perturbations=per_family,
        shots_per_perturbation=config.shots_per_perturbation,
        reindex_time=config.reindex_time,
    )
    est = {}
    for i, (u, v) in enumerate(QUADRATURE_PAIRS):
        kick = build_fermionic_kick(spec, site_r, species, v)
        obs, _ = parity_conjugated_observable(spec, site_R, species, u)
        tmpl = build_scp_template(plan, terms, kick, obs, noise=noise)
        tmpl = tmpl.with_initial_state(psi0.amplitudes)
        est[(u, v)] = estimate_scp(tmpl, fam_config, rng.substream(i), exact=exact)
    real = 0.5 * lam * (est[("x", "y")].values + est[("y", "x")].values)
    imag = -0.5 * lam * (est[("x", "x")].values - est[("y", "y")].values)
    se_re = 0.5 * np.sqrt(est[("x", "y")].std_errors ** 2
                          + est[("y", "x")].std_errors ** 2)
    se_im = 0.5 * np.sqrt(est[("x", "x")].std_errors ** 2
                          + est[("y", "y")].std_errors ** 2)
    meta = {
        "estimator": "scp-fermionic",
        "site_R": site_R,
        "site_r": site_r,
        "species": species,
        "parity": lam,
        "epsilon": config.epsilon,
        "perturbations_per_family": per_family,
        "gamma": 0.0 if noise is None else noise.gamma,
    }
    return GreenTrace(est[("x", "x")].times, real + 1j * imag, se_re, meta,
                      std_errors_imag=se_im)


# ---------------------------------------------------------------------------
# variance models


@dataclass(frozen=True)
class VarianceModel:
    """Eq.-level SCP variance prediction inputs."""

    c_scp: float
    perturbations: int
    shots_per_perturbation: int
    epsilon: float
    grad_norm_sq: float
    grad_component_sq: float

    def __post_init__(self):
        if self.perturbations < 1 or self.shots_per_perturbation < 1:
            raise ValueError("P and S must be at least 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def predicted_variance(model: VarianceModel) -> float:
    """Var[g^(k)] = Var_eta[g^(k)]/P + c/(P S eps^2), with the first term in
    its O(eps^0) form |grad|^2 - (grad_k)^2."""
    first = (model.grad_norm_sq - model.grad_component_sq) / model.perturbations
    second = model.c_scp / (
        model.perturbations * model.shots_per_perturbation * model.epsilon**2
    )
    return max(first, 0.0) + second


def lcp_point_variance(expectation: float, shots: int) -> float:
    """Per-point LCP shot variance (1 - <sigma>^2)/shots for single-Pauli
    observables, with `shots` the total circuit runs spent on the point."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    return (1.0 - expectation**2) / shots
