"""Shared dense-matrix helpers: a brute-force Kronecker oracle kept separate
from the package's own linear algebra."""
from __future__ import annotations

import numpy as np
import pytest

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_chain(ops: list[np.ndarray]) -> np.ndarray:
    """Tensor product with qubit 0 as the least significant factor."""
    out = np.eye(1, dtype=complex)
    for op in reversed(ops):
        out = np.kron(out, op)
    return out


def pauli_matrix(label: str) -> np.ndarray:
    """Dense matrix for a label listing qubit 0 first."""
    return kron_chain([PAULIS[c] for c in label])


def op_on(n: int, qubit: int, mat: np.ndarray) -> np.ndarray:
    ops = [I2] * n
    ops[qubit] = mat
    return kron_chain(ops)


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return v / np.linalg.norm(v)


def states_close_up_to_phase(a: np.ndarray, b: np.ndarray, atol=1e-9) -> bool:
    return abs(abs(np.vdot(a, b)) - 1.0) < atol


def unitaries_close_up_to_phase(U: np.ndarray, V: np.ndarray, atol=1e-9) -> bool:
    d = U.shape[0]
    return abs(abs(np.trace(U.conj().T @ V)) / d - 1.0) < atol


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
