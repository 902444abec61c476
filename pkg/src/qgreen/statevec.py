"""Dense statevector engine: gates, Pauli expectations, sampling, noise.

Conventions used throughout the package:
  * qubit 0 is the least significant bit of the amplitude index;
  * a pauli-rotation gate with angle theta applies exp(-i(theta/2) P);
  * kets in docs/tests list qubit 0 first, so |10> means q0=1, q1=0 (index 1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pauli import PauliString, parity

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
_PAULI_1Q = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class RngStream:
    """Seeded random stream; (seed, stream_id) fully determines the draws.

    Substreams derive deterministically from the parent's id, so independent
    shots/trajectories can each own a stream and aggregation stays
    order-independent.
    """

    def __init__(self, seed: int, stream_id: int | tuple[int, ...] = 0):
        self.seed = int(seed)
        self.stream_id = (stream_id,) if isinstance(stream_id, int) else tuple(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream_id)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + (int(index),))


@dataclass
class NoiseSpec:
    """Two-qubit depolarizing noise, one stochastic event per two-qubit block."""

    gamma: float
    scope: str = "two_qubit_blocks"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class Gate:
    """A circuit element.

    kinds:
      'rotation'  exp(-i(angle/2) P) for the Pauli string `pauli` (any weight)
      'cnot'      support = (control, target)
      'fixed1q'   a fixed single-qubit matrix (H, Sdg, ...) in `matrix`
      'block'     a named two-qubit-block composite defined by `primitives`;
                  counts as one two-qubit gate for noise purposes
    """

    kind: str
    support: tuple[int, ...]
    angle: float = 0.0
    pauli: Optional[PauliString] = None
    matrix: Optional[np.ndarray] = None
    label: str = ""
    primitives: tuple["Gate", ...] = ()

    @classmethod
    def rotation(cls, pauli: PauliString, angle: float) -> "Gate":
        if pauli.phase not in (1, -1):
            raise ValueError("rotation generator must be Hermitian (phase +-1)")
        return cls("rotation", pauli.support, float(angle), pauli=pauli,
                   label=f"R[{pauli.label()}]")

    @classmethod
    def cnot(cls, control: int, target: int) -> "Gate":
        if control == target:
            raise ValueError("control and target must differ")
        return cls("cnot", (control, target), label="CNOT")

    @classmethod
    def fixed1q(cls, qubit: int, matrix: np.ndarray, label: str) -> "Gate":
        return cls("fixed1q", (qubit,), matrix=matrix, label=label)

    @classmethod
    def block(cls, support: tuple[int, ...], primitives: tuple["Gate", ...],
              label: str) -> "Gate":
        return cls("block", tuple(support), primitives=primitives, label=label)

    @classmethod
    def hadamard(cls, qubit: int) -> "Gate":
        return cls.fixed1q(qubit, _H, "H")

    @classmethod
    def sdg(cls, qubit: int) -> "Gate":
        return cls.fixed1q(qubit, _SDG, "Sdg")

    def is_two_qubit_block(self) -> bool:
        return self.kind in ("cnot", "block") or (
            self.kind == "rotation" and len(self.support) >= 2
        )

    def noise_pair(self) -> tuple[int, int]:
        """Qubit pair a depolarizing event attaches to (block endpoints)."""
        return (min(self.support), max(self.support))


class StateVector:
    """Dense complex amplitude array over n qubits; mutated in place."""

    def __init__(self, n_qubits: int, amplitudes: Optional[np.ndarray] = None):
        self.n_qubits = int(n_qubits)
        dim = 1 << self.n_qubits
        if amplitudes is None:
            amp = np.zeros(dim, dtype=complex)
            amp[0] = 1.0
        else:
            amp = np.asarray(amplitudes, dtype=complex).reshape(-1).copy()
            if amp.shape[0] != dim:
                raise ValueError("amplitude length must be 2^n_qubits")
        self.amplitudes = amp

    @classmethod
    def from_basis_state(cls, n_qubits: int, index: int) -> "StateVector":
        sv = cls(n_qubits)
        sv.amplitudes[0] = 0.0
        sv.amplitudes[index] = 1.0
        return sv

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> None:
        self.amplitudes /= self.norm()


# ---------------------------------------------------------------------------
# gate application


def _apply_1q_matrix(amp: np.ndarray, U: np.ndarray, qubit: int, n: int) -> np.ndarray:
    v = amp.reshape(1 << (n - 1 - qubit), 2, 1 << qubit)
    out = np.einsum("ab,ibk->iak", U, v)
    return out.reshape(-1)


def _apply_2q_matrix(amp: np.ndarray, U: np.ndarray, qa: int, qb: int, n: int) -> np.ndarray:
    # qa < qb; U indexed as U[b'a', ba] with qubit qa the low bit
    v = amp.reshape(1 << (n - 1 - qb), 2, 1 << (qb - qa - 1), 2, 1 << qa)
    U4 = U.reshape(2, 2, 2, 2)  # [b', a', b, a]
    out = np.einsum("BAba,ibjak->iBjAk", U4, v)
    return out.reshape(-1)


def gate_matrix_on_support(gate: Gate) -> tuple[np.ndarray, tuple[int, ...]]:
    """Dense matrix of `gate` on its sorted support, low qubit = low bit."""
    if gate.kind == "fixed1q":
        return gate.matrix, gate.support
    if gate.kind == "cnot":
        c, t = gate.support
        lo, hi = min(c, t), max(c, t)
        c_bit = 0 if c == lo else 1
        t_bit = 1 - c_bit
        U = np.zeros((4, 4), dtype=complex)
        for basis in range(4):
            out = basis ^ (1 << t_bit) if (basis >> c_bit) & 1 else basis
            U[out, basis] = 1.0
        return U, (lo, hi)
    if gate.kind == "rotation":
        sup = gate.pauli.support
        sub = PauliString(
            len(sup),
            tuple(gate.pauli.factors[q] for q in sup),
            gate.pauli.phase,
        )
        P = sub.matrix()
        dim = P.shape[0]
        U = np.cos(gate.angle / 2) * np.eye(dim) - 1j * np.sin(gate.angle / 2) * P
        return U, tuple(sup)
    if gate.kind == "block":
        sup = tuple(sorted(gate.support))
        dim = 1 << len(sup)
        U = np.eye(dim, dtype=complex)
        remap = {q: i for i, q in enumerate(sup)}
        for prim in gate.primitives:
            pg = _remap_gate(prim, remap)
            for k in range(dim):
                U[:, k] = apply_gate(
                    StateVector(len(sup), U[:, k]), pg
                ).amplitudes
        return U, sup
    raise ValueError(f"unknown gate kind {gate.kind}")


def _remap_gate(gate: Gate, remap: dict[int, int]) -> Gate:
    sup = tuple(remap[q] for q in gate.support)
    if gate.kind == "rotation":
        p = gate.pauli
        factors = [0] * len(remap)
        for q in p.support:
            factors[remap[q]] = p.factors[q]
        return Gate.rotation(PauliString(len(remap), tuple(factors), p.phase), gate.angle)
    if gate.kind == "cnot":
        return Gate.cnot(*sup)
    if gate.kind == "fixed1q":
        return Gate.fixed1q(sup[0], gate.matrix, gate.label)
    raise ValueError("blocks may not nest")


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Apply `gate` in place and return the state (norm preserved)."""
    n = state.n_qubits
    if any(not 0 <= q < n for q in gate.support):
        raise ValueError(f"gate support {gate.support} outside {n}-qubit register")
    amp = state.amplitudes
    if gate.kind == "fixed1q":
        state.amplitudes = _apply_1q_matrix(amp, gate.matrix, gate.support[0], n)
    elif gate.kind == "cnot":
        c, t = gate.support
        idx = np.arange(1 << n)
        sel = (idx >> c) & 1
        state.amplitudes = amp[np.where(sel == 1, idx ^ (1 << t), idx)]
    elif gate.kind == "rotation":
        p = gate.pauli
        if p.weight == 0:
            return state  # identity generator: global phase only
        if p.weight == 1:
            q = p.support[0]
            P1 = p.phase * _PAULI_1Q[p.factors[q]]
            U = np.cos(gate.angle / 2) * np.eye(2) - 1j * np.sin(gate.angle / 2) * P1
            state.amplitudes = _apply_1q_matrix(amp, U, q, n)
        else:
            # exp(-i(theta/2)P) = cos I - i sin P, P applied matrix-free
            c, s = np.cos(gate.angle / 2), np.sin(gate.angle / 2)
            state.amplitudes = c * amp - 1j * s * p.apply(amp)
    elif gate.kind == "block":
        for prim in gate.primitives:
            apply_gate(state, prim)
    else:
        raise ValueError(f"unknown gate kind {gate.kind}")
    return state


def apply_circuit(state: StateVector, gates, noise: NoiseSpec | None = None,
                  rng: RngStream | None = None) -> StateVector:
    """Apply a gate sequence; with noise, one depolarizing event per 2q block."""
    for gate in gates:
        apply_gate(state, gate)
        if noise is not None and noise.gamma > 0 and gate.is_two_qubit_block():
            apply_depolarizing(state, gate.noise_pair(), noise.gamma, rng)
    return state


# ---------------------------------------------------------------------------
# measurement


def expectation_pauli(state: StateVector, obs: PauliString) -> float | complex:
    """Exact <psi|P|psi>; real for Hermitian (phase +-1) strings."""
    if obs.n_qubits != state.n_qubits:
        raise ValueError("register size mismatch")
    val = np.vdot(state.amplitudes, obs.apply(state.amplitudes))
    if obs.is_hermitian:
        return float(val.real)
    return complex(val)


def sample_pauli_outcome(state: StateVector, obs: PauliString, rng: RngStream) -> int:
    """One +-1 shot of a Hermitian phase-+1 Pauli; P(+1) = (1+<P>)/2."""
    if obs.phase != 1:
        raise ValueError("sampled observable must have phase +1")
    m = expectation_pauli(state, obs)
    u = rng.generator.random()
    return 1 if u < (1.0 + m) / 2.0 else -1


def sample_bitstring(state: StateVector, rng: RngStream) -> int:
    """Sample a computational-basis index from |amplitudes|^2."""
    probs = np.abs(state.amplitudes) ** 2
    probs /= probs.sum()
    return int(rng.generator.choice(probs.shape[0], p=probs))


_TWO_QUBIT_PAULIS = [(a, b) for a in range(4) for b in range(4)][1:]  # skip (I, I)


def apply_depolarizing(state: StateVector, qubits: tuple[int, int], gamma: float,
                       rng: RngStream) -> StateVector:
    """Stochastic unraveling of the two-qubit depolarizing channel.

    With probability 15*gamma/16 a uniformly random non-identity two-qubit
    Pauli is applied to the pair; averaged over the rng this reproduces
    (1-gamma) rho + gamma Tr_pair[rho] (x) I/4.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    qa, qb = qubits
    if rng.generator.random() < 15.0 * gamma / 16.0:
        pa, pb = _TWO_QUBIT_PAULIS[rng.generator.integers(15)]
        for q, code in ((qa, pa), (qb, pb)):
            if code:
                state.amplitudes = _apply_1q_matrix(
                    state.amplitudes, _PAULI_1Q[code], q, state.n_qubits
                )
    return state


def measurement_basis_change(group: list[PauliString]) -> list[Gate]:
    """Single-qubit rotations mapping a qubit-wise commuting group to Z form.

    X -> H, Y -> H Sdg (applied Sdg first), Z -> nothing.  Raises if two
    strings demand different non-identity axes on one qubit.
    """
    n = group[0].n_qubits
    axis: dict[int, str] = {}
    for p in group:
        for q in p.support:
            a = p.axis_on(q)
            if axis.setdefault(q, a) != a:
                raise ValueError("observables are not qubit-wise commuting")
    gates: list[Gate] = []
    for q, a in sorted(axis.items()):
        if a == "X":
            gates.append(Gate.hadamard(q))
        elif a == "Y":
            gates.append(Gate.sdg(q))
            gates.append(Gate.hadamard(q))
    return gates


def outcome_from_bits(index: int, obs: PauliString) -> int:
    """+-1 outcome of a (basis-changed, Z-form) observable given sampled bits."""
    mask = 0
    for q in obs.support:
        mask |= 1 << q
    return 1 - 2 * int(parity(index & mask))
