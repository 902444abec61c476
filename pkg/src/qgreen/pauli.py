"""Signed Pauli-string algebra.

A PauliString is phase * W_{n-1} x ... x W_1 x W_0 with W_j in {I, X, Y, Z}
acting on qubit j and phase in {1, -1, 1j, -1j}.  Qubit 0 is the least
significant bit of the statevector amplitude index; kets written in docs and
tests list qubit 0 first (|q0 q1 ...>).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_I, _X, _Y, _Z = 0, 1, 2, 3
_CODE = {"I": _I, "X": _X, "Y": _Y, "Z": _Z}
_LABEL = "IXYZ"

_MATRICES = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

# single-qubit products: W_a W_b = _PROD_PHASE[a,b] * _PROD_CODE[a,b]
_PROD_CODE = np.zeros((4, 4), dtype=np.int8)
_PROD_PHASE = np.ones((4, 4), dtype=complex)
for _a in range(4):
    _m = None
    for _b in range(4):
        _prod = _MATRICES[_a] @ _MATRICES[_b]
        for _c in range(4):
            for _ph in (1, -1, 1j, -1j):
                if np.allclose(_prod, _ph * _MATRICES[_c]):
                    _PROD_CODE[_a, _b] = _c
                    _PROD_PHASE[_a, _b] = _ph


_VALID_PHASES = (1 + 0j, -1 + 0j, 1j, -1j)


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis with an exact unit phase."""

    n_qubits: int
    factors: tuple[int, ...]
    phase: complex = 1 + 0j

    def __post_init__(self):
        if len(self.factors) != self.n_qubits:
            raise ValueError("factors length must equal n_qubits")
        if not any(abs(self.phase - p) < 1e-14 for p in _VALID_PHASES):
            raise ValueError(f"phase must be one of +-1, +-i, got {self.phase}")

    # -- constructors ------------------------------------------------------

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, (_I,) * n_qubits)

    @classmethod
    def from_label(cls, label: str, phase: complex = 1 + 0j) -> "PauliString":
        """Build from a dense label, qubit 0 first: 'XIZ' = X0 Z2 on 3 qubits."""
        return cls(len(label), tuple(_CODE[c] for c in label.upper()), phase)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, axis: str) -> "PauliString":
        factors = [_I] * n_qubits
        factors[qubit] = _CODE[axis.upper()]
        return cls(n_qubits, tuple(factors))

    @classmethod
    def from_axes(cls, n_qubits: int, sites: dict[int, str], phase: complex = 1 + 0j) -> "PauliString":
        factors = [_I] * n_qubits
        for q, ax in sites.items():
            factors[q] = _CODE[ax.upper()]
        return cls(n_qubits, tuple(factors), phase)

    # -- algebra -----------------------------------------------------------

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n_qubits != other.n_qubits:
            raise ValueError("size mismatch")
        phase = self.phase * other.phase
        factors = []
        for a, b in zip(self.factors, other.factors):
            factors.append(int(_PROD_CODE[a, b]))
            phase *= _PROD_PHASE[a, b]
        return PauliString(self.n_qubits, tuple(factors), complex(phase))

    def __neg__(self) -> "PauliString":
        return PauliString(self.n_qubits, self.factors, -self.phase)

    def commutes_with(self, other: "PauliString") -> bool:
        anti = sum(
            1
            for a, b in zip(self.factors, other.factors)
            if a != _I and b != _I and a != b
        )
        return anti % 2 == 0

    # -- properties --------------------------------------------------------

    @property
    def weight(self) -> int:
        return sum(1 for f in self.factors if f != _I)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, f in enumerate(self.factors) if f != _I)

    @property
    def is_hermitian(self) -> bool:
        return self.phase in (1, -1)

    def x_mask(self) -> int:
        """Bit mask of qubits whose factor flips the basis (X or Y)."""
        m = 0
        for q, f in enumerate(self.factors):
            if f in (_X, _Y):
                m |= 1 << q
        return m

    def z_mask(self) -> int:
        """Bit mask of qubits contributing a (-1)^bit sign (Z or Y)."""
        m = 0
        for q, f in enumerate(self.factors):
            if f in (_Z, _Y):
                m |= 1 << q
        return m

    def y_count(self) -> int:
        return sum(1 for f in self.factors if f == _Y)

    def axis_on(self, qubit: int) -> str:
        return _LABEL[self.factors[qubit]]

    def label(self) -> str:
        return "".join(_LABEL[f] for f in self.factors)

    def __repr__(self) -> str:
        ph = {1 + 0j: "+", -1 + 0j: "-", 1j: "+i", -1j: "-i"}
        key = min(_VALID_PHASES, key=lambda p: abs(p - self.phase))
        return f"PauliString({ph[key]}{self.label()})"

    # -- dense form (small registers; oracles and tests) --------------------

    def matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix; qubit 0 is the LSB of the row index."""
        out = np.eye(1, dtype=complex)
        for f in reversed(self.factors):
            out = np.kron(out, _MATRICES[f])
        return self.phase * out

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """Matrix-free action on a dense amplitude vector."""
        xm, zm = self.x_mask(), self.z_mask()
        dim = amplitudes.shape[0]
        idx = np.arange(dim)
        signs = 1 - 2 * (parity(idx & zm)).astype(np.int64)
        coeff = self.phase * (1j) ** self.y_count()
        out = np.empty_like(amplitudes)
        out[idx ^ xm] = coeff * signs * amplitudes
        return out


_PARITY16 = np.array([bin(i).count("1") & 1 for i in range(1 << 16)], dtype=np.uint8)


def parity(values: np.ndarray | int) -> np.ndarray | int:
    """Bit parity of integers (vectorized), for registers up to 32 bits."""
    v = np.asarray(values)
    return (_PARITY16[v & 0xFFFF] ^ _PARITY16[(v >> 16) & 0xFFFF]).astype(np.uint8)
