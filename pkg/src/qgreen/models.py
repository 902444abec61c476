"""Lattice models: Heisenberg chains and the 1D Fermi-Hubbard model.

The Hubbard model is mapped to qubits with the Jordan-Wigner transformation
a_r^dag = Z_0..Z_{r-1} (X_r + iY_r)/2, which makes occupation 1 correspond to
the qubit |0> state (n_r = (I+Z_r)/2).  Spin species are blocked: modes
0..M-1 carry spin-up sites, modes M..2M-1 spin-down.

Term order in a HamiltonianTerms list is meaningful: it is the first-order
Trotter product order.  Chains emit even bonds before odd bonds, with the
same-bond axis terms adjacent so the circuit builder can fuse them.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .pauli import PauliString
from .statevec import StateVector


@dataclass(frozen=True)
class SpinChainSpec:
    """Nearest-neighbour spin-1/2 chain with per-axis exchange couplings."""

    length: int
    jx: float = 1.0
    jy: float = 1.0
    jz: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("chain length must be at least 2")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if not all(np.isfinite([self.jx, self.jy, self.jz])):
            raise ValueError("couplings must be finite")

    @property
    def n_qubits(self) -> int:
        return self.length


@dataclass(frozen=True)
class HubbardSpec:
    """1D Hubbard chain: hopping J, on-site repulsion U, two spin species."""

    sites: int
    hopping: float = 1.0
    interaction: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.sites < 2:
            raise ValueError("need at least 2 sites")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def n_qubits(self) -> int:
        return 2 * self.sites

    def mode(self, site: int, species: str) -> int:
        """Qubit index of (site, species) in the blocked layout."""
        if species not in ("up", "down"):
            raise ValueError("species must be 'up' or 'down'")
        if not 0 <= site < self.sites:
            raise ValueError(f"site {site} outside lattice")
        return site + (0 if species == "up" else self.sites)


@dataclass
class HamiltonianTerms:
    """Ordered list of (real coefficient, PauliString) pairs."""

    n_qubits: int
    terms: list[tuple[float, PauliString]] = field(default_factory=list)

    def add(self, coeff: float, pauli: PauliString) -> None:
        if pauli.n_qubits != self.n_qubits:
            raise ValueError("term register size mismatch")
        if abs(np.imag(coeff)) > 0:
            raise ValueError("coefficients must be real (Hermiticity)")
        self.terms.append((float(coeff), pauli))

    def dense(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        H = np.zeros((dim, dim), dtype=complex)
        for c, p in self.terms:
            H += c * p.matrix()
        return H

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """Matrix-free H @ v (for iterative eigensolvers)."""
        out = np.zeros_like(amplitudes)
        for c, p in self.terms:
            out += c * p.apply(amplitudes)
        return out


@dataclass(frozen=True)
class TrotterPlan:
    """First-order Trotter grid: N steps of length tau = T/N."""

    total_time: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("need at least one Trotter step")
        if self.total_time < 0:
            raise ValueError("total_time must be non-negative")

    @property
    def tau(self) -> float:
        return self.total_time / self.steps

    def times(self) -> np.ndarray:
        """Perturbation-slot times n*tau for n = 0..N-1."""
        return self.tau * np.arange(self.steps)


@dataclass
class SpectralData:
    """Dense eigendecomposition; eigenvectors are columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ground_index: int

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[self.ground_index])

    @property
    def ground_vector(self) -> np.ndarray:
        return self.eigenvectors[:, self.ground_index]

    def frequencies(self) -> np.ndarray:
        """Excitation energies omega_e = E_e - E_0."""
        return self.eigenvalues - self.ground_energy


# ---------------------------------------------------------------------------
# Heisenberg


def chain_bonds(length: int, boundary: str) -> list[tuple[int, int]]:
    """Bond list (r, r+1 mod L), even-r bonds first, then odd-r bonds."""
    n_bonds = length if boundary == "periodic" else length - 1
    if boundary == "periodic" and length == 2:
        # wrap bond duplicates (0,1); keep a single bond
        warnings.warn("L=2 periodic chain has a doubled bond; keeping one copy")
        return [(0, 1)]
    bonds = [(r, (r + 1) % length) for r in range(n_bonds)]
    return [b for i, b in enumerate(bonds) if i % 2 == 0] + [
        b for i, b in enumerate(bonds) if i % 2 == 1
    ]


def build_heisenberg_terms(spec: SpinChainSpec) -> HamiltonianTerms:
    """H = sum_r sum_axis J^axis sigma^axis_r sigma^axis_{r+1}."""
    terms = HamiltonianTerms(spec.length)
    for a, b in chain_bonds(spec.length, spec.boundary):
        for axis, J in (("X", spec.jx), ("Y", spec.jy), ("Z", spec.jz)):
            terms.add(J, PauliString.from_axes(spec.length, {a: axis, b: axis}))
    return terms


# ---------------------------------------------------------------------------
# Hubbard via Jordan-Wigner


def jw_annihilation(n_qubits: int, mode: int) -> list[tuple[complex, PauliString]]:
    """a_mode = Z-string (X - iY)/2 as a Pauli-sum."""
    zs = {q: "Z" for q in range(mode)}
    x = PauliString.from_axes(n_qubits, {**zs, mode: "X"})
    y = PauliString.from_axes(n_qubits, {**zs, mode: "Y"})
    return [(0.5, x), (-0.5j, y)]


def jw_creation(n_qubits: int, mode: int) -> list[tuple[complex, PauliString]]:
    """a_mode^dag = Z-string (X + iY)/2 as a Pauli-sum."""
    zs = {q: "Z" for q in range(mode)}
    x = PauliString.from_axes(n_qubits, {**zs, mode: "X"})
    y = PauliString.from_axes(n_qubits, {**zs, mode: "Y"})
    return [(0.5, x), (0.5j, y)]


def _hop_strings(n_qubits: int, p: int, q: int) -> list[PauliString]:
    """X_p Z.. X_q and Y_p Z.. Y_q for the mode pair p < q."""
    zs = {k: "Z" for k in range(p + 1, q)}
    return [
        PauliString.from_axes(n_qubits, {p: ax, **zs, q: ax}) for ax in ("X", "Y")
    ]


def build_hubbard_terms_jw(spec: HubbardSpec) -> HamiltonianTerms:
    """JW image of the Hubbard Hamiltonian.

    -J(a_p^dag a_q + h.c.) maps to +J/2 (X_p Z.. X_q + Y_p Z.. Y_q) under
    the creation convention above; U n n maps onto I/Z/ZZ with n = (I+Z)/2.
    """
    n = spec.n_qubits
    M = spec.sites
    terms = HamiltonianTerms(n)
    site_bonds = chain_bonds(M, spec.boundary)
    for species_offset in (0, M):
        for a, b in site_bonds:
            p, q = sorted((a + species_offset, b + species_offset))
            for s in _hop_strings(n, p, q):
                terms.add(spec.hopping / 2.0, s)
    ident = 0.0
    for mu in range(M):
        up, dn = mu, M + mu
        ident += spec.interaction / 4.0
        terms.add(spec.interaction / 4.0, PauliString.single(n, up, "Z"))
        terms.add(spec.interaction / 4.0, PauliString.single(n, dn, "Z"))
        terms.add(
            spec.interaction / 4.0, PauliString.from_axes(n, {up: "Z", dn: "Z"})
        )
    if ident != 0.0:
        terms.add(ident, PauliString.identity(n))
    return terms


def total_number_values(n_modes: int) -> np.ndarray:
    """Diagonal of the total particle number in the computational basis.

    Occupation 1 corresponds to bit 0, so N(b) = n_modes - popcount(b).
    """
    idx = np.arange(1 << n_modes)
    pop = np.zeros_like(idx)
    for q in range(n_modes):
        pop += (idx >> q) & 1
    return n_modes - pop


def parity_operator(n_modes: int) -> PauliString:
    """The auxiliary operator Z_0 ... Z_{n-1}."""
    return PauliString.from_axes(n_modes, {q: "Z" for q in range(n_modes)})


# ---------------------------------------------------------------------------
# exact diagonalization

GROUND_STATE_QUBIT_BUDGET = 14


def _canonical_phase(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    ph = vec[k] / abs(vec[k])
    return vec / ph


def ground_state_exact(terms: HamiltonianTerms) -> tuple[StateVector, SpectralData]:
    """Dense ground state and full spectrum (registers up to 14 qubits).

    Degenerate ground spaces resolve deterministically: eigh's ordering plus
    a canonical global phase (largest-magnitude amplitude made real positive).
    """
    if terms.n_qubits > GROUND_STATE_QUBIT_BUDGET:
        raise ValueError(
            f"register of {terms.n_qubits} qubits exceeds the dense solve budget"
        )
    H = terms.dense()
    evals, evecs = np.linalg.eigh(H)
    g = int(np.argmin(evals))
    evecs = evecs.copy()
    evecs[:, g] = _canonical_phase(evecs[:, g])
    data = SpectralData(evals, evecs, g)
    return StateVector(terms.n_qubits, data.ground_vector), data


def sector_ground_state(
    terms: HamiltonianTerms, n_particles: int
) -> tuple[StateVector, float]:
    """Ground state within a fixed particle-number sector.

    The particle number commutes with the Hubbard Hamiltonian, so the dense
    matrix block-diagonalizes over computational-basis occupation classes.
    """
    nvals = total_number_values(terms.n_qubits)
    sel = np.where(nvals == n_particles)[0]
    if sel.size == 0:
        raise ValueError(f"empty particle-number sector {n_particles}")
    H = terms.dense()[np.ix_(sel, sel)]
    evals, evecs = np.linalg.eigh(H)
    vec = np.zeros(1 << terms.n_qubits, dtype=complex)
    vec[sel] = _canonical_phase(evecs[:, 0])
    return StateVector(terms.n_qubits, vec), float(evals[0])


def hubbard_ground_state(spec: HubbardSpec) -> tuple[StateVector, float, int]:
    """Half-filled ground state and its parity eigenvalue lambda.

    The global Fock-space minimum of the repulsive model sits below half
    filling, so the physically relevant half-filled sector is selected
    explicitly.  Returns (state, energy, lambda) with P|psi> = lambda|psi>.
    """
    terms = build_hubbard_terms_jw(spec)
    state, energy = sector_ground_state(terms, spec.sites)
    par = parity_operator(spec.n_qubits)
    lam = np.vdot(state.amplitudes, par.apply(state.amplitudes)).real
    if abs(abs(lam) - 1.0) > 1e-9:
        raise ValueError("ground state is not a parity eigenstate")
    return state, energy, int(round(lam))


class LehmannOverlaps(NamedTuple):
    omegas: np.ndarray
    a: np.ndarray
    b: np.ndarray


def lehmann_overlaps(
    spectral: SpectralData, op_a: PauliString, op_b: PauliString
) -> LehmannOverlaps:
    """<psi0|A|e><e|B|psi0> split into real (a_e) and imaginary (b_e) parts,
    with omega_e measured from the ground energy."""
    psi0 = spectral.ground_vector
    a_psi = op_a.apply(psi0)
    b_psi = op_b.apply(psi0)
    left = spectral.eigenvectors.conj().T @ a_psi  # <e|A|psi0>
    right = spectral.eigenvectors.conj().T @ b_psi  # <e|B|psi0>
    prod = np.conj(left) * right  # <psi0|A|e><e|B|psi0>
    return LehmannOverlaps(spectral.frequencies(), prod.real, prod.imag)
