"""Independent brute-force references for every estimator.

Nothing here touches the circuit compiler or the batched engine: unitaries
are rebuilt from the Hamiltonian terms with dense Pauli matrices, fermionic
operators from occupation-number rules with explicit antisymmetric signs,
and the noisy reference evolves a density matrix.  Agreement with the
estimators is therefore evidence, not tautology.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import HamiltonianTerms, HubbardSpec, SpectralData, TrotterPlan, lehmann_overlaps
from .pauli import PauliString

ORACLE_QUBIT_BUDGET = 12


@dataclass
class OracleTrace:
    times: np.ndarray
    values: np.ndarray
    source: str


# ---------------------------------------------------------------------------
# spectral (continuum) reference


def exact_rgf_spectral(spectral: SpectralData, op_a: PauliString,
                       op_b: PauliString, times: np.ndarray) -> OracleTrace:
    """G(t) = sum_e a_e sin(omega_e t) from the Lehmann overlaps of
    <psi0|A|e><e|B|psi0>; equals -Im<A(t)B> for real ground states."""
    ov = lehmann_overlaps(spectral, op_a, op_b)
    times = np.asarray(times, dtype=float)
    values = np.sin(np.outer(times, ov.omegas)) @ ov.a
    return OracleTrace(times, values, "spectral")


def heisenberg_picture_correlator(spectral: SpectralData, op_a: PauliString,
                                  op_b: PauliString, times: np.ndarray) -> np.ndarray:
    """<psi0| A(t) B |psi0> computed directly from the eigenbasis."""
    psi0 = spectral.ground_vector
    left = spectral.eigenvectors.conj().T @ op_a.apply(psi0)
    right = spectral.eigenvectors.conj().T @ op_b.apply(psi0)
    phases = np.exp(-1j * np.outer(np.asarray(times), spectral.frequencies()))
    return phases @ (np.conj(left) * right)


# ---------------------------------------------------------------------------
# dense Trotter reference


def dense_trotter_step(terms: HamiltonianTerms, tau: float) -> np.ndarray:
    """Product of exp(-i c_k P_k tau) over the term order, as a dense matrix.

    Identity terms contribute a pure global phase and are skipped.
    """
    dim = 1 << terms.n_qubits
    U = np.eye(dim, dtype=complex)
    for c, p in terms.terms:
        if p.weight == 0:
            continue
        P = p.matrix()
        U = (np.cos(c * tau) * np.eye(dim) - 1j * np.sin(c * tau) * P) @ U
    return U


def _kick_matrix(kick: PauliString, theta: float) -> np.ndarray:
    """Dense slot gate exp(+i(theta/2) K), matching the template convention."""
    dim = 1 << kick.n_qubits
    return np.cos(theta / 2) * np.eye(dim) + 1j * np.sin(theta / 2) * kick.matrix()


def exact_trotter_rgf(plan: TrotterPlan, terms: HamiltonianTerms,
                      kick: PauliString, obs: PauliString, n_bar: int,
                      psi0: np.ndarray) -> float:
    """Zero-shot-noise LCP value (F(pi/2) - F(-pi/2))/2 of the exact circuit
    the estimators sample: n_bar Trotter steps, the kick, N - n_bar steps."""
    if terms.n_qubits > ORACLE_QUBIT_BUDGET:
        raise ValueError("register too large for the dense oracle")
    if not 0 <= n_bar < plan.steps:
        raise ValueError("kick index must lie before the readout")
    U = dense_trotter_step(terms, plan.tau)
    pre = np.asarray(psi0, dtype=complex).reshape(-1)
    for _ in range(n_bar):
        pre = U @ pre
    M = obs.matrix()
    vals = {}
    for sign in (1, -1):
        v = _kick_matrix(kick, sign * np.pi / 2) @ pre
        for _ in range(plan.steps - n_bar):
            v = U @ v
        vals[sign] = float(np.real(np.vdot(v, M @ v)))
    return 0.5 * (vals[1] - vals[-1])


def exact_trotter_gradient(plan: TrotterPlan, terms: HamiltonianTerms,
                           kick: PauliString, obs: PauliString,
                           psi0: np.ndarray) -> np.ndarray:
    """All N components of the exact circuit gradient in one O(N dim^2) pass.

    Component k equals exact_trotter_rgf at n_bar = k:
    g_k = -Im <w_k, K psi_k> with psi_k = U^k psi0 and w_k the observable
    back-propagated N-k steps (w_N = M psi_N, w_k = U^dag w_{k+1}).
    """
    if terms.n_qubits > ORACLE_QUBIT_BUDGET:
        raise ValueError("register too large for the dense oracle")
    U = dense_trotter_step(terms, plan.tau)
    N = plan.steps
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    forward = [psi]
    for _ in range(N):
        forward.append(U @ forward[-1])
    M = obs.matrix()
    Ud = U.conj().T
    w = M @ forward[N]
    grad = np.empty(N)
    for k in range(N - 1, -1, -1):
        w = Ud @ w  # w = U^dag^(N-k) M psi_N
        grad[k] = -np.imag(np.vdot(w, kick.apply(forward[k])))
    return grad


def exact_scp_reference_trace(plan: TrotterPlan, terms: HamiltonianTerms,
                              kick: PauliString, obs: PauliString,
                              psi0: np.ndarray) -> OracleTrace:
    """Dense-Trotter reference on the SCP grid: separation j*tau holds the
    gradient component k = N - j."""
    grad = exact_trotter_gradient(plan, terms, kick, obs, psi0)
    times = plan.tau * np.arange(1, plan.steps + 1)
    return OracleTrace(times, grad[::-1].copy(), "dense-trotter")


def exact_lcp_reference_trace(plan: TrotterPlan, terms: HamiltonianTerms,
                              kick: PauliString, obs: PauliString,
                              psi0: np.ndarray) -> OracleTrace:
    """Dense-Trotter reference for kick-at-zero circuits of j = 1..N steps."""
    if terms.n_qubits > ORACLE_QUBIT_BUDGET:
        raise ValueError("register too large for the dense oracle")
    U = dense_trotter_step(terms, plan.tau)
    M = obs.matrix()
    u = np.asarray(psi0, dtype=complex).reshape(-1)
    v = kick.apply(u)
    vals = np.empty(plan.steps)
    for j in range(plan.steps):
        u = U @ u
        v = U @ v
        vals[j] = -np.imag(np.vdot(M @ u, v))
    times = plan.tau * np.arange(1, plan.steps + 1)
    return OracleTrace(times, vals, "dense-trotter")


# ---------------------------------------------------------------------------
# fermions in the occupation basis


def fermion_annihilation_matrix(n_modes: int, mode: int) -> np.ndarray:
    """a_mode with explicit antisymmetric signs.

    Basis identification matches the qubit register: occupation n_j = 1 for
    bit j = 0, and the sign string counts empty modes below `mode` (a
    (-1)^j gauge of the occupied-count convention; the CAR algebra holds).
    """
    dim = 1 << n_modes
    a = np.zeros((dim, dim))
    below = (1 << mode) - 1
    for b in range(dim):
        if b & (1 << mode):
            continue  # mode empty (bit 1 means empty): nothing to annihilate
        sign = (-1) ** int(bin(b & below).count("1"))
        a[b | (1 << mode), b] = sign
    return a


def hubbard_hamiltonian_occupation(spec: HubbardSpec) -> np.ndarray:
    """Dense second-quantized Hubbard Hamiltonian, built operator by operator."""
    n = spec.n_qubits
    a_ops = [fermion_annihilation_matrix(n, m) for m in range(n)]
    H = np.zeros((1 << n, 1 << n))
    from .models import chain_bonds

    for offset in (0, spec.sites):
        for i, j in chain_bonds(spec.sites, spec.boundary):
            p, q = i + offset, j + offset
            hop = a_ops[p].T @ a_ops[q] + a_ops[q].T @ a_ops[p]
            H -= spec.hopping * hop
    for mu in range(spec.sites):
        n_up = a_ops[mu].T @ a_ops[mu]
        n_dn = a_ops[spec.sites + mu].T @ a_ops[spec.sites + mu]
        H += spec.interaction * (n_up @ n_dn)
    return H


def _half_filled_ground(spec: HubbardSpec, H: np.ndarray) -> tuple[np.ndarray, float]:
    n = spec.n_qubits
    idx = np.arange(1 << n)
    filled = np.zeros_like(idx)
    for q in range(n):
        filled += 1 - ((idx >> q) & 1)
    sel = np.where(filled == spec.sites)[0]
    evals, evecs = np.linalg.eigh(H[np.ix_(sel, sel)])
    psi = np.zeros(1 << n, dtype=complex)
    psi[sel] = evecs[:, 0]
    return psi, float(evals[0])


def exact_fermionic_gf(spec: HubbardSpec, site_R: int, site_r: int,
                       times: np.ndarray, species: str = "up") -> OracleTrace:
    """-i Theta(dt) <{a_R(dt), a_r^dag(0)}> on the half-filled ground state,
    via dense Heisenberg evolution in the occupation basis (Theta(0) = 1)."""
    if spec.n_qubits > ORACLE_QUBIT_BUDGET:
        raise ValueError("register too large for the dense oracle")
    H = hubbard_hamiltonian_occupation(spec)
    psi0, e0 = _half_filled_ground(spec, H)
    evals, evecs = np.linalg.eigh(H)
    aR = fermion_annihilation_matrix(spec.n_qubits, spec.mode(site_R, species))
    adr = fermion_annihilation_matrix(spec.n_qubits, spec.mode(site_r, species)).T
    times = np.asarray(times, dtype=float)
    # <psi0 aR e^{-iH dt} adr psi0> e^{i e0 dt}  +  <psi0 adr e^{+iH dt} aR psi0> e^{-i e0 dt}
    left1 = evecs.conj().T @ (aR.conj().T @ psi0)
    right1 = evecs.conj().T @ (adr @ psi0)
    part1 = np.exp(1j * np.outer(times, e0 - evals)) @ (np.conj(left1) * right1)
    left2 = evecs.conj().T @ (adr.conj().T @ psi0)
    right2 = evecs.conj().T @ (aR @ psi0)
    part2 = np.exp(1j * np.outer(times, evals - e0)) @ (np.conj(left2) * right2)
    values = -1j * (part1 + part2)
    return OracleTrace(times, values, "spectral")


def _dense_gradient_matrices(plan: TrotterPlan, terms: HamiltonianTerms,
                             kick_matrix: np.ndarray, obs_matrix: np.ndarray,
                             psi0: np.ndarray) -> np.ndarray:
    """exact_trotter_gradient with dense kick/observable operators."""
    U = dense_trotter_step(terms, plan.tau)
    N = plan.steps
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    forward = [psi]
    for _ in range(N):
        forward.append(U @ forward[-1])
    Ud = U.conj().T
    w = obs_matrix @ forward[N]
    grad = np.empty(N)
    for k in range(N - 1, -1, -1):
        w = Ud @ w
        grad[k] = -np.imag(np.vdot(w, kick_matrix @ forward[k]))
    return grad


def exact_fermionic_trotter_gf(spec: HubbardSpec, site_R: int, site_r: int,
                               plan: TrotterPlan, species: str = "up",
                               terms: Optional[HamiltonianTerms] = None
                               ) -> OracleTrace:
    """Zero-shot-noise limit of the fermionic quadrature pipeline on the
    Trotterized dynamics: the reference the shot-based estimates fluctuate
    around.

    Kick and response operators come from the oracle's own occupation-basis
    fermion matrices (B_x = a + a^dag, B_y = i(a - a^dag), responses
    conjugated by the parity operator); only the Hamiltonian term list is
    shared as a domain object.
    """
    from .models import build_hubbard_terms_jw

    if terms is None:
        terms = build_hubbard_terms_jw(spec)
    n = spec.n_qubits
    Hocc = hubbard_hamiltonian_occupation(spec)
    psi0, _ = _half_filled_ground(spec, Hocc)
    idx = np.arange(1 << n)
    parity_diag = 1.0 - 2.0 * (np.array([bin(b).count("1") & 1 for b in idx]))
    lam = float(np.real(np.vdot(psi0, parity_diag * psi0)))
    lam = int(round(lam))
    a_R = fermion_annihilation_matrix(n, spec.mode(site_R, species))
    a_r = fermion_annihilation_matrix(n, spec.mode(site_r, species))
    B = {
        "x": a_r + a_r.T,
        "y": 1j * (a_r - a_r.T),
    }
    P = np.diag(parity_diag.astype(complex))
    # P (Z-string sigma^x) = +i M_x, P (Z-string sigma^y) = -i M_y
    M = {
        "x": -1j * (P @ (a_R + a_R.T)),
        "y": 1j * (P @ (1j * (a_R - a_R.T))),
    }
    g = {
        (u, v): _dense_gradient_matrices(plan, terms, B[v], M[u], psi0)
        for u in ("x", "y") for v in ("x", "y")
    }
    values = 0.5 * lam * (
        (g[("x", "y")] + g[("y", "x")])
        - 1j * (g[("x", "x")] - g[("y", "y")])
    )
    times = plan.tau * np.arange(1, plan.steps + 1)
    return OracleTrace(times, values[::-1].copy(), "dense-trotter")


def _noisy_step_ops(spec: HubbardSpec, tau: float, n: int):
    """Full-register (unitary, noise_pair|None) list for one Trotter step."""
    from .circuits import trotter_step_circuit
    from .models import build_hubbard_terms_jw
    from .statevec import gate_matrix_on_support

    ops = []
    for gate in trotter_step_circuit(build_hubbard_terms_jw(spec), tau):
        U, sup = gate_matrix_on_support(gate)
        pair = gate.noise_pair() if gate.is_two_qubit_block() else None
        ops.append((_embed(U, sup, n), pair))
    return ops


def noisy_fermionic_trotter_gf(spec: HubbardSpec, site_R: int, site_r: int,
                               plan: TrotterPlan, gamma: float,
                               species: str = "up") -> OracleTrace:
    """Channel-exact noisy reference: the depolarizing channel applied after
    every two-qubit block of the density-matrix evolution, with the
    parameter-shift quadrature recombination evaluated exactly.

    One forward pass stores the noisy states rho_k and one backward pass
    propagates each response observable through the adjoint channel, so the
    whole trace costs O(N) superoperator steps.
    """
    if spec.n_qubits > 8:
        raise ValueError("density-matrix oracle limited to 8 qubits")
    n = spec.n_qubits
    N = plan.steps
    ops = _noisy_step_ops(spec, plan.tau, n)

    Hocc = hubbard_hamiltonian_occupation(spec)
    psi0, _ = _half_filled_ground(spec, Hocc)
    idx = np.arange(1 << n)
    parity_diag = 1.0 - 2.0 * np.array([bin(b).count("1") & 1 for b in idx])
    lam = int(round(float(np.real(np.vdot(psi0, parity_diag * psi0)))))
    a_R = fermion_annihilation_matrix(n, spec.mode(site_R, species))
    a_r = fermion_annihilation_matrix(n, spec.mode(site_r, species))
    B = {"x": (a_r + a_r.T).astype(complex), "y": 1j * (a_r - a_r.T)}
    P = np.diag(parity_diag.astype(complex))
    M = {
        "x": -1j * (P @ (a_R + a_R.T)),
        "y": 1j * (P @ (1j * (a_R - a_R.T))),
    }
    kick_pair = None
    kick_mode = spec.mode(site_r, species)
    if kick_mode > 0:
        kick_pair = (0, kick_mode)  # JW string endpoints

    def forward_states():
        rho = np.outer(psi0, psi0.conj())
        out = [rho.copy()]
        for _ in range(N):
            for U, pair in ops:
                rho = U @ rho @ U.conj().T
                if pair is not None:
                    rho = depolarize_pair(rho, pair, gamma, n)
            out.append(rho.copy())
        return out

    def backward_observables(obs):
        # adjoint channel: reversed op order, conjugation by U^dag, with the
        # (self-adjoint) depolarizing factor applied before each gate adjoint
        out = [obs.copy()]
        m = obs.copy()
        for _ in range(N):
            for U, pair in reversed(ops):
                if pair is not None:
                    m = depolarize_pair(m, pair, gamma, n)
                m = U.conj().T @ m @ U
            out.append(m.copy())
        return out

    rhos = forward_states()
    g = {}
    for u in ("x", "y"):
        ms = backward_observables(M[u])
        for v in ("x", "y"):
            Kp = np.cos(np.pi / 4) * np.eye(1 << n) + 1j * np.sin(np.pi / 4) * B[v]
            Km = np.cos(np.pi / 4) * np.eye(1 << n) - 1j * np.sin(np.pi / 4) * B[v]
            vals = np.empty(N)
            for k in range(N):
                m_k = ms[N - k]
                fval = {}
                for sign, K in ((1, Kp), (-1, Km)):
                    rho_kick = K @ rhos[k] @ K.conj().T
                    if kick_pair is not None:
                        rho_kick = depolarize_pair(rho_kick, kick_pair, gamma, n)
                    fval[sign] = float(np.real(np.trace(rho_kick @ m_k)))
                vals[k] = 0.5 * (fval[1] - fval[-1])
            g[(u, v)] = vals
    values = 0.5 * lam * (
        (g[("x", "y")] + g[("y", "x")]) - 1j * (g[("x", "x")] - g[("y", "y")])
    )
    times = plan.tau * np.arange(1, N + 1)
    return OracleTrace(times, values[::-1].copy(), "density-matrix")


def free_fermion_propagator(spec: HubbardSpec, site_R: int, site_r: int,
                            times: np.ndarray) -> np.ndarray:
    """U=0 single-species reference: -i [exp(-i h dt)]_{R r} for the one-body
    hopping matrix h (independent of filling by canonical anticommutation)."""
    M = spec.sites
    h = np.zeros((M, M))
    from .models import chain_bonds

    for i, j in chain_bonds(M, spec.boundary):
        h[i, j] -= spec.hopping
        h[j, i] -= spec.hopping
    evals, evecs = np.linalg.eigh(h)
    phases = np.exp(-1j * np.outer(np.asarray(times), evals))
    return -1j * (phases * (evecs[site_R] * evecs[site_r].conj())).sum(axis=1)


# ---------------------------------------------------------------------------
# density-matrix reference for the depolarizing channel


def _embed(U: np.ndarray, support: tuple[int, ...], n: int) -> np.ndarray:
    """Lift a gate matrix on sorted `support` to the full register."""
    dim = 1 << n
    full = np.zeros((dim, dim), dtype=complex)
    rest = [q for q in range(n) if q not in support]
    k = len(support)
    for loc_in in range(1 << k):
        for loc_out in range(1 << k):
            amp = U[loc_out, loc_in]
            if amp == 0:
                continue
            base_in = 0
            base_out = 0
            for i, q in enumerate(support):
                base_in |= ((loc_in >> i) & 1) << q
                base_out |= ((loc_out >> i) & 1) << q
            for fill in range(1 << len(rest)):
                off = 0
                for i, q in enumerate(rest):
                    off |= ((fill >> i) & 1) << q
                full[base_out | off, base_in | off] += amp
    return full


def _trace_out_qubit(rho: np.ndarray, q: int) -> np.ndarray:
    """Tr_q[rho] (x) I_q / 2 on the full register (single-qubit twirl)."""
    dim = rho.shape[0]
    idx = np.arange(dim)
    lo = idx[((idx >> q) & 1) == 0]
    hi = lo | (1 << q)
    avg = 0.5 * (rho[np.ix_(lo, lo)] + rho[np.ix_(hi, hi)])
    out = np.zeros_like(rho)
    out[np.ix_(lo, lo)] = avg
    out[np.ix_(hi, hi)] = avg
    return out


def depolarize_pair(rho: np.ndarray, pair: tuple[int, int], gamma: float,
                    n: int) -> np.ndarray:
    """(1-gamma) rho + gamma Tr_pair[rho] (x) I/4.

    The traced term equals the uniform average over all 16 two-qubit Pauli
    sandwiches; it is computed here as two sequential single-qubit
    trace-outs, which costs O(dim^2)."""
    qa, qb = pair
    return (1 - gamma) * rho + gamma * _trace_out_qubit(_trace_out_qubit(rho, qa), qb)


def depolarize_pair_twirl(rho: np.ndarray, pair: tuple[int, int], gamma: float,
                          n: int) -> np.ndarray:
    """Reference twirl form of depolarize_pair (explicit 16-Pauli average)."""
    qa, qb = sorted(pair)
    acc = np.zeros_like(rho)
    for pa in range(4):
        for pb in range(4):
            P = _embed(np.kron(_PAULI1[pb], _PAULI1[pa]), (qa, qb), n)
            acc += P @ rho @ P.conj().T
    return (1 - gamma) * rho + gamma * acc / 16.0


_PAULI1 = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
