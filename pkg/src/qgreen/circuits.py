"""Differentiable circuit templates: Trotter steps with perturbation slots.

A slot with physical angle theta applies exp(+i(theta/2) G) for its generator
G; the estimators' shift formulas (half the difference of the +-pi/2
evaluations, symmetric finite differences, the Rademacher gradient average)
then reproduce traces of the form sum_e a_e sin(omega_e t) with a_e the
Lehmann overlap coefficients, i.e. the same orientation the spectral oracle
uses.  Gate-level rotations stay in the standard exp(-i(angle/2) P)
convention; binding negates the slot angle once.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .models import HamiltonianTerms, HubbardSpec, TrotterPlan
from .pauli import PauliString
from .statevec import Gate, NoiseSpec, RngStream


# ---------------------------------------------------------------------------
# two-qubit block decompositions


def _rot1(n: int, qubit: int, axis: str, angle: float) -> Gate:
    return Gate.rotation(PauliString.single(n, qubit, axis), angle)


def heisenberg_bond_block(n: int, a: int, b: int, jx: float, jy: float,
                          jz: float, tau: float) -> Gate:
    """3-CNOT block equal to exp(-i tau (jx XX + jy YY + jz ZZ)) on (a, b),
    up to a global phase exp(i pi/4)."""
    gx, gy, gz = 2 * jx * tau, 2 * jy * tau, 2 * jz * tau
    prim = (
        Gate.cnot(a, b),
        _rot1(n, a, "X", gx - np.pi / 2),
        _rot1(n, b, "Z", gz),
        Gate.hadamard(a),
        Gate.cnot(a, b),
        Gate.hadamard(a),
        _rot1(n, b, "Z", -gy),
        Gate.cnot(a, b),
        _rot1(n, a, "X", np.pi / 2),
        _rot1(n, b, "X", -np.pi / 2),
    )
    return Gate.block((a, b), prim, "heis-bond")


def hop_block(n: int, a: int, b: int, theta: float) -> Gate:
    """2-CNOT block equal to exp(-i theta (XX + YY)) on the pair (a, b)."""
    prim = (
        _rot1(n, a, "X", np.pi / 2),
        _rot1(n, b, "X", np.pi / 2),
        Gate.cnot(a, b),
        _rot1(n, a, "X", 2 * theta),
        _rot1(n, b, "Z", 2 * theta),
        Gate.cnot(a, b),
        _rot1(n, a, "X", -np.pi / 2),
        _rot1(n, b, "X", -np.pi / 2),
    )
    return Gate.block((a, b), prim, "hop")


def string_rotation(n: int, pauli: PauliString, angle: float) -> Gate:
    """exp(-i(angle/2) P) carrying its CNOT-ladder decomposition.

    Per-qubit basis changes (X via Ry(-pi/2)..Ry(pi/2), Y via Rx(pi/2)..
    Rx(-pi/2)) bracket a Z-parity ladder with the rotation on the last
    support qubit.
    """
    sup = pauli.support
    if len(sup) <= 1:
        return Gate.rotation(pauli, angle)
    pre: list[Gate] = []
    post: list[Gate] = []
    for q in sup:
        ax = pauli.axis_on(q)
        if ax == "X":
            pre.append(_rot1(n, q, "Y", -np.pi / 2))
            post.append(_rot1(n, q, "Y", np.pi / 2))
        elif ax == "Y":
            pre.append(_rot1(n, q, "X", np.pi / 2))
            post.append(_rot1(n, q, "X", -np.pi / 2))
    ladder = [Gate.cnot(sup[i], sup[i + 1]) for i in range(len(sup) - 1)]
    sign_angle = angle if pauli.phase == 1 else -angle
    core = [_rot1(n, sup[-1], "Z", sign_angle)]
    prim = tuple(pre + ladder + core + ladder[::-1] + post)
    g = Gate.rotation(pauli, angle)
    return replace(g, primitives=prim)


def trotter_step_circuit(terms: HamiltonianTerms, tau: float) -> list[Gate]:
    """One first-order Trotter step: product of exp(-i c_k P_k tau) in term
    order, with same-support runs fused into the two-qubit blocks above.

    Identity terms contribute only a global phase and are dropped.
    """
    n = terms.n_qubits
    gates: list[Gate] = []
    items = [(c, p) for c, p in terms.terms if p.weight > 0]
    i = 0
    while i < len(items):
        c, p = items[i]
        run = [(c, p)]
        j = i + 1
        while j < len(items) and items[j][1].support == p.support:
            run.append(items[j])
            j += 1
        gates.extend(_compile_run(n, run, tau))
        i = j
    return gates


def _compile_run(n: int, run: list[tuple[float, PauliString]], tau: float) -> list[Gate]:
    sup = run[0][1].support
    axes = ["".join(p.axis_on(q) for q in sup) for _, p in run]
    if len(sup) == 2:
        by_axes = dict(zip(axes, (c for c, _ in run)))
        if set(axes) == {"XX", "YY", "ZZ"} and len(run) == 3:
            a, b = sup
            return [heisenberg_bond_block(n, a, b, by_axes["XX"], by_axes["YY"],
                                          by_axes["ZZ"], tau)]
        if set(axes) == {"XX", "YY"} and len(run) == 2 and np.isclose(
            by_axes["XX"], by_axes["YY"]
        ):
            a, b = sup
            return [hop_block(n, a, b, by_axes["XX"] * tau)]
        if axes == ["ZZ"] and len(run) == 1:
            a, b = sup
            c = run[0][0]
            prim = (Gate.cnot(a, b), _rot1(n, b, "Z", 2 * c * tau), Gate.cnot(a, b))
            g = Gate.rotation(run[0][1], 2 * c * tau)
            return [replace(g, primitives=prim)]
    out = []
    for c, p in run:
        if not _supported_shape(p):
            raise ValueError(f"unsupported term shape {p!r}")
        out.append(string_rotation(n, p, 2 * c * tau))
    return out


def _supported_shape(p: PauliString) -> bool:
    return p.weight >= 1 and p.phase in (1, -1)


# ---------------------------------------------------------------------------
# templates


@dataclass(frozen=True)
class PerturbationSlot:
    """A tagged kick position: inserted just before Trotter step `step_index`."""

    step_index: int
    generator: PauliString


@dataclass(frozen=True)
class CircuitTemplate:
    """Unperturbed Trotter propagator plus tagged perturbation slots.

    Execution order per step n: slots with step_index == n, then the step
    gates; binding all slot angles to zero reduces the template to the plain
    propagator.
    """

    n_qubits: int
    step_gates: tuple[Gate, ...]
    n_steps: int
    slots: tuple[PerturbationSlot, ...]
    observables: tuple[PauliString, ...]
    noise: Optional[NoiseSpec] = None
    plan: Optional[TrotterPlan] = None
    initial_state: Optional[np.ndarray] = None

    def with_initial_state(self, psi0: np.ndarray) -> "CircuitTemplate":
        return replace(self, initial_state=np.asarray(psi0, dtype=complex).reshape(-1))

    def __post_init__(self):
        for s in self.slots:
            if not 0 <= s.step_index < self.n_steps:
                raise ValueError(f"slot index {s.step_index} outside [0, {self.n_steps})")
            if s.generator.n_qubits != self.n_qubits:
                raise ValueError("slot generator acts outside the register")
        for o in self.observables:
            if o.n_qubits != self.n_qubits:
                raise ValueError("observable acts outside the register")

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    def slot_gate(self, slot: PerturbationSlot, angle: float) -> Gate:
        """exp(+i(angle/2) G): the bound gate for a slot angle."""
        return Gate.rotation(slot.generator, -angle)

    def bound_gates(self, angles: Sequence[float]) -> list[Gate]:
        """Full gate list with the given slot angles (zeros allowed)."""
        if len(angles) != self.n_slots:
            raise ValueError("angle count must match slot count")
        by_step: dict[int, list[Gate]] = {}
        for slot, theta in zip(self.slots, angles):
            by_step.setdefault(slot.step_index, []).append(self.slot_gate(slot, theta))
        gates: list[Gate] = []
        for step in range(self.n_steps):
            gates.extend(by_step.get(step, ()))
            gates.extend(self.step_gates)
        return gates


@dataclass(frozen=True)
class BoundCircuit:
    """A template with concrete slot angles."""

    template: CircuitTemplate
    angles: np.ndarray

    def gates(self) -> list[Gate]:
        return self.template.bound_gates(self.angles)


def build_lcp_template(plan: TrotterPlan, terms: HamiltonianTerms,
                       kick: PauliString, n_bar: int,
                       obs: PauliString | Sequence[PauliString],
                       noise: NoiseSpec | None = None) -> CircuitTemplate:
    """Single perturbation slot before Trotter step n_bar (kick time n_bar*tau).

    For n_bar = 0 the circuit contains no pre-kick evolution at all.
    """
    if not 0 <= n_bar < plan.steps:
        raise ValueError(f"n_bar = {n_bar} must lie in [0, {plan.steps})")
    observables = (obs,) if isinstance(obs, PauliString) else tuple(obs)
    return CircuitTemplate(
        n_qubits=terms.n_qubits,
        step_gates=tuple(trotter_step_circuit(terms, plan.tau)),
        n_steps=plan.steps,
        slots=(PerturbationSlot(n_bar, kick),),
        observables=observables,
        noise=noise,
        plan=plan,
    )


def build_scp_template(plan: TrotterPlan, terms: HamiltonianTerms,
                       kick: PauliString,
                       obs: PauliString | Sequence[PauliString],
                       noise: NoiseSpec | None = None) -> CircuitTemplate:
    """One slot per Trotter step (N slots), all sharing the kick generator."""
    observables = (obs,) if isinstance(obs, PauliString) else tuple(obs)
    slots = tuple(PerturbationSlot(nn, kick) for nn in range(plan.steps))
    return CircuitTemplate(
        n_qubits=terms.n_qubits,
        step_gates=tuple(trotter_step_circuit(terms, plan.tau)),
        n_steps=plan.steps,
        slots=slots,
        observables=observables,
        noise=noise,
        plan=plan,
    )


def draw_rademacher(rng: RngStream, n: int) -> np.ndarray:
    """A +-1 vector of independent fair signs."""
    return (1 - 2 * rng.generator.integers(0, 2, size=n)).astype(np.int8)


def bind_rademacher(template: CircuitTemplate, eta: np.ndarray, epsilon: float,
                    sign: int) -> BoundCircuit:
    """Slot k receives angle sign * epsilon * eta[k]."""
    eta = np.asarray(eta)
    if eta.shape != (template.n_slots,):
        raise ValueError(
            f"eta length {eta.shape} must match slot count {template.n_slots}"
        )
    if not np.all(np.abs(eta) == 1):
        raise ValueError("eta entries must be +-1")
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    return BoundCircuit(template, sign * epsilon * eta.astype(float))


# ---------------------------------------------------------------------------
# fermionic kicks


def build_fermionic_kick(spec: HubbardSpec, site: int, species: str,
                         quadrature: str) -> PauliString:
    """The Hermitian quadrature Z_0..Z_{m-1} sigma^{x|y}_m for mode m.

    These are the a + a^dag (x) and i(a - a^dag)-type (y) kick generators;
    site 0 spin-up carries no Z prefix.  Every output anticommutes with the
    parity operator Z_0..Z_{2M-1}.
    """
    if quadrature not in ("x", "y"):
        raise ValueError("quadrature must be 'x' or 'y'")
    mode = spec.mode(site, species)
    axes = {q: "Z" for q in range(mode)}
    axes[mode] = quadrature.upper()
    return PauliString.from_axes(spec.n_qubits, axes)


def parity_conjugated_observable(spec: HubbardSpec, site: int, species: str,
                                 quadrature: str) -> tuple[PauliString, int]:
    """Hermitian part of P * Z_0..Z_{R-1} sigma^{x|y}_R and its i-sign.

    P Z_R-string sigma^x_R = +i (Y_R Z_{R+1} .. Z_{2M-1});
    P Z_R-string sigma^y_R = -i (X_R Z_{R+1} .. Z_{2M-1}).
    Returns (Hermitian string M, s) with the product equal to i*s*M.
    """
    if quadrature not in ("x", "y"):
        raise ValueError("quadrature must be 'x' or 'y'")
    mode = spec.mode(site, species)
    n = spec.n_qubits
    axes = {q: "Z" for q in range(mode + 1, n)}
    if quadrature == "x":
        axes[mode] = "Y"
        s = +1
    else:
        axes[mode] = "X"
        s = -1
    return PauliString.from_axes(n, axes), s


# ---------------------------------------------------------------------------
# probability oracle


def build_probability_oracle(n_qubits: int, gates: Sequence[Gate],
                             obs: PauliString) -> tuple[list[Gate], int]:
    """Ancilla circuit whose a=0 outcome occurs with probability (1+<P>)/2.

    Appends, after the given gates, a basis change diagonalizing `obs`
    (H for X, Sdg then H for Y) and a CNOT fan from the support qubits into
    a fresh ancilla (index n_qubits).  Returns (gates, ancilla_index).
    """
    if obs.weight == 0:
        raise ValueError("observable must have weight at least 1")
    if obs.phase != 1:
        raise ValueError("observable must have phase +1")
    if obs.n_qubits != n_qubits:
        raise ValueError("observable register mismatch")
    ancilla = n_qubits
    out: list[Gate] = list(gates)
    for q in obs.support:
        ax = obs.axis_on(q)
        if ax == "X":
            out.append(Gate.hadamard(q))
        elif ax == "Y":
            out.append(Gate.sdg(q))
            out.append(Gate.hadamard(q))
    for q in obs.support:
        out.append(Gate.cnot(q, ancilla))
    return out, ancilla


def ancilla_zero_probability(amplitudes: np.ndarray, ancilla: int) -> float:
    """Probability that the ancilla qubit reads 0."""
    idx = np.arange(amplitudes.shape[0])
    mask = ((idx >> ancilla) & 1) == 0
    return float(np.sum(np.abs(amplitudes[mask]) ** 2))
