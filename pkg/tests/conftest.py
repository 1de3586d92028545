import numpy as np
import pytest

from starkmagic.states import SeededRng, StateVector


@pytest.fixture
def rng():
    return SeededRng(20240811)


def dense_pauli(x_mask: int, z_mask: int, L: int) -> np.ndarray:
    """Independent Kronecker oracle for the Hermitian Pauli (site 0 = last factor)."""
    I = np.eye(2)
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    Z = np.array([[1, 0], [0, -1]], dtype=complex)
    table = {(0, 0): I, (1, 0): X, (0, 1): Z, (1, 1): Y}
    out = np.array([[1.0 + 0j]])
    for site in range(L):
        out = np.kron(table[((x_mask >> site) & 1, (z_mask >> site) & 1)], out)
    return out


def dense_chain_hamiltonian(L: int, J, h, F, couplings=None) -> np.ndarray:
    """Kronecker-built H = sum_{i<j} J_ij Z_i Z_j + h sum X_i + F sum i Z_i."""
    dim = 1 << L
    H = np.zeros((dim, dim), dtype=complex)
    if couplings is None:
        couplings = np.zeros((L, L))
        for i in range(L - 1):
            couplings[i, i + 1] = J
    for i in range(L):
        for j in range(i + 1, L):
            if couplings[i, j] or couplings[j, i]:
                Jij = couplings[i, j] if couplings[i, j] else couplings[j, i]
                H += Jij * dense_pauli(0, (1 << i) | (1 << j), L)
        H += h * dense_pauli(1 << i, 0, L)
        H += F * i * dense_pauli(0, 1 << i, L)
    return H


def random_product_state(L: int, gen: np.random.Generator) -> StateVector:
    amps = np.array([1.0 + 0j])
    for _ in range(L):
        v = gen.normal(size=2) + 1j * gen.normal(size=2)
        v = v / np.linalg.norm(v)
        amps = np.kron(v, amps)
    return StateVector(L, amps)
