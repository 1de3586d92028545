"""Tilted Ising Hamiltonians and the initial-state families.

The Hamiltonian is H = sum_{i<j} J_ij Z_i Z_j + h sum_i X_i + F sum_i i Z_i
on an open chain of L sites (nearest-neighbor J_ij = J delta_{j,i+1} in the
chain case).  The Z-only part is stored as a dense diagonal over the 2^L
basis states; the uniform transverse field acts implicitly as bit flips, so
a matvec costs O(L 2^L) and memory stays O(2^L).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, DimensionError, ResourceError
from .states import (
    MAX_QUBITS_DEFAULT,
    BitString,
    SeededRng,
    StateVector,
    as_generator,
    product_state,
)

#: largest register find_z_star will search exhaustively
Z_STAR_MAX_QUBITS = 20


@dataclass(frozen=True)
class ChainSpec:
    """Nearest-neighbor tilted Ising chain (open boundary; the tilt breaks translation)."""

    L: int
    J: float = 1.0
    h: float = 1.0
    F: float = 0.0
    boundary: str = "open"

    def __post_init__(self):
        if self.L < 2:
            raise ConfigError("chain needs L >= 2")
        if self.boundary != "open":
            raise ConfigError("only open boundaries are supported")

    def coupling_matrix(self) -> np.ndarray:
        J = np.zeros((self.L, self.L))
        for i in range(self.L - 1):
            J[i, i + 1] = J[i + 1, i] = self.J
        return J


@dataclass
class LongRangeSpec:
    """Ising chain with an explicit symmetric coupling matrix J_ij (zero diagonal)."""

    L: int
    couplings: np.ndarray
    h: float = 1.0
    F: float = 0.0

    def __post_init__(self):
        self.couplings = np.asarray(self.couplings, dtype=float)
        if self.couplings.shape != (self.L, self.L):
            raise DimensionError("coupling matrix must be L x L")
        if not np.allclose(self.couplings, self.couplings.T, atol=1e-12):
            raise ConfigError("coupling matrix must be symmetric")
        if np.max(np.abs(np.diag(self.couplings))) > 1e-12:
            raise ConfigError("coupling matrix must have zero diagonal")

    @classmethod
    def power_law(
        cls,
        L: int,
        J0: float = 1.0,
        alpha: float = 1.13,
        cutoff: Optional[int] = None,
        h: float = 1.0,
        F: float = 0.0,
    ) -> "LongRangeSpec":
        """J_ij = J0 / |i-j|^alpha, optionally truncated beyond `cutoff` sites."""
        J = np.zeros((L, L))
        for i in range(L):
            for j in range(i + 1, L):
                r = j - i
                if cutoff is not None and r > cutoff:
                    continue
                J[i, j] = J[j, i] = J0 / r**alpha
        return cls(L, J, h=h, F=F)

    def coupling_matrix(self) -> np.ndarray:
        return self.couplings


ModelSpec = Union[ChainSpec, LongRangeSpec]


@dataclass(frozen=True)
class InitialStateSpec:
    """One of the product-state families the quenches start from."""

    kind: str
    n_samples: int = 1
    seed: int = 0

    KINDS = ("z_polarized", "x_polarized", "y_polarized", "z_star", "random_bloch")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown initial-state kind {self.kind!r}; choose from {self.KINDS}")
        if self.kind == "random_bloch" and self.n_samples < 1:
            raise ConfigError("random_bloch needs n_samples >= 1")


@dataclass
class SparseHamiltonian:
    """Z-diagonal stored densely plus an implicit uniform X field of strength h."""

    L: int
    diagonal: np.ndarray
    x_field: float

    def __post_init__(self):
        self.diagonal = np.asarray(self.diagonal, dtype=float)
        if self.diagonal.shape != (1 << self.L,):
            raise DimensionError("diagonal length must be 2^L")

    @property
    def dim(self) -> int:
        return 1 << self.L

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        """H |psi> = diagonal * psi + h * sum_i psi(s ^ 2^i)."""
        out = self.diagonal * psi
        if self.x_field != 0.0:
            block = psi.reshape((2,) * self.L)
            acc = np.zeros_like(block)
            for axis in range(self.L):
                acc += np.flip(block, axis=axis)
            out = out + self.x_field * acc.reshape(-1)
        return out

    def apply(self, state: StateVector) -> StateVector:
        if state.n_qubits != self.L:
            raise DimensionError("state size does not match Hamiltonian")
        return StateVector(self.L, self.matvec(state.amplitudes))

    def expectation(self, state: StateVector) -> float:
        val = np.vdot(state.amplitudes, self.matvec(state.amplitudes))
        return float(val.real)

    def dense(self) -> np.ndarray:
        """Explicit real-symmetric matrix; small L only (used by the eigen propagator)."""
        dim = self.dim
        H = np.diag(self.diagonal.astype(float))
        idx = np.arange(dim)
        for i in range(self.L):
            H[idx, idx ^ (1 << i)] += self.x_field
        return H

    def norm_scale(self) -> float:
        """Cheap upper bound on ||H|| used for error budgets."""
        return float(np.max(np.abs(self.diagonal)) + abs(self.x_field) * self.L)


def site_z_values(L: int) -> np.ndarray:
    """(L, 2^L) array of z_i(s) = +1/-1 eigenvalues, row i for site i."""
    idx = np.arange(1 << L, dtype=np.int64)
    bits = (idx[None, :] >> np.arange(L)[:, None]) & 1
    return 1.0 - 2.0 * bits


def build_hamiltonian(spec: ModelSpec, max_qubits: int = MAX_QUBITS_DEFAULT) -> SparseHamiltonian:
    """Assemble the diagonal + implicit-X representation for either spec flavor."""
    L = spec.L
    if not 2 <= L <= max_qubits:
        raise ResourceError(f"L={L} outside the supported range [2, {max_qubits}]")
    z = site_z_values(L)
    J = spec.coupling_matrix()
    diag = spec.F * (np.arange(L) @ z)
    # upper triangle once per pair; einsum keeps this O(L^2 2^L)
    for i in range(L):
        row = J[i, i + 1 :]
        if np.any(row):
            diag += z[i] * (row @ z[i + 1 :])
    return SparseHamiltonian(L, diag, float(spec.h))


def diagonal_energies(spec: ModelSpec) -> np.ndarray:
    """Z-part eigenvalues on every basis state (transverse field excluded)."""
    z = site_z_values(spec.L)
    J = spec.coupling_matrix()
    diag = spec.F * (np.arange(spec.L) @ z)
    for i in range(spec.L):
        row = J[i, i + 1 :]
        if np.any(row):
            diag += z[i] * (row @ z[i + 1 :])
    return diag


def find_z_star(spec: ModelSpec) -> BitString:
    """Basis state minimizing |diagonal energy|; ties broken by smallest index."""
    if spec.L > Z_STAR_MAX_QUBITS:
        raise ResourceError(f"exhaustive z_star search capped at L={Z_STAR_MAX_QUBITS}")
    diag = diagonal_energies(spec)
    return BitString(int(np.argmin(np.abs(diag))), spec.L)


def _bloch_site(gen: np.random.Generator) -> np.ndarray:
    """One uniformly random Bloch vector: phi ~ U[0,2pi), cos(theta) ~ U[-1,1]."""
    phi = gen.uniform(0.0, 2.0 * np.pi)
    theta = np.arccos(gen.uniform(-1.0, 1.0))
    # R_z(phi) R_y(theta) |0>
    return np.array(
        [
            np.exp(-0.5j * phi) * np.cos(theta / 2),
            np.exp(+0.5j * phi) * np.sin(theta / 2),
        ]
    )


def prepare_initial_state(
    spec: InitialStateSpec,
    L: int,
    model: Optional[ModelSpec] = None,
    max_qubits: int = MAX_QUBITS_DEFAULT,
) -> list[StateVector]:
    """Build the requested family; deterministic kinds return a single-element list.

    `z_star` needs the model spec to evaluate diagonal energies.
    """
    if spec.kind == "z_polarized":
        return [StateVector.computational_basis(L, 0)]
    if spec.kind == "x_polarized":
        plus = np.array([1.0, 1.0]) / np.sqrt(2)
        return [product_state([plus] * L, max_qubits=max_qubits)]
    if spec.kind == "y_polarized":
        plus_y = np.array([1.0, 1.0j]) / np.sqrt(2)
        return [product_state([plus_y] * L, max_qubits=max_qubits)]
    if spec.kind == "z_star":
        if model is None:
            raise ConfigError("z_star initial state needs the model spec")
        star = find_z_star(model)
        return [StateVector.computational_basis(L, star.value)]
    if spec.kind == "random_bloch":
        gen = as_generator(SeededRng(spec.seed, stream=0))
        out = []
        for _ in range(spec.n_samples):
            out.append(product_state([_bloch_site(gen) for _ in range(L)], max_qubits=max_qubits))
        return out
    raise ConfigError(f"unknown initial-state kind {spec.kind!r}")
