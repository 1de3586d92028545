"""Dense statevector substrate: Pauli strings, single-qubit gates, sampling.

Conventions used by the whole package:

* site i of an L-qubit register is bit i of the basis-state index
  (little-endian), so basis index s encodes the outcome string with
  site 0 in the lowest bit;
* Z|0> = +|0>, Z|1> = -|1>;
* the Hermitian Pauli associated with masks (x, z) is
  i^{popcount(x & z)} X^x Z^z, which makes every expectation value real.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError, ResourceError

MAX_QUBITS_DEFAULT = 14
NORM_TOL = 1e-6
UNITARY_TOL = 1e-10

# single-qubit gate matrices used throughout
PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PHASE_S = np.array([[1, 0], [0, 1j]], dtype=complex)


def popcount(x) -> np.ndarray:
    """Number of set bits of a nonnegative int or integer array (fits in 64 bits)."""
    return np.bitwise_count(np.asarray(x, dtype=np.uint64))


def rotation_y(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rotation_x(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rotation_z(phi: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * phi), 0], [0, np.exp(0.5j * phi)]], dtype=complex)


@dataclass
class SeededRng:
    """Deterministic random stream: identical (seed, stream) gives identical draws."""

    seed: int
    stream: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.default_rng(ss)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def as_generator(rng) -> np.random.Generator:
    """Accept a SeededRng, a numpy Generator, or an int seed."""
    if isinstance(rng, SeededRng):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng))
    raise TypeError(f"cannot interpret {type(rng).__name__} as a random generator")


@dataclass(frozen=True)
class PauliString:
    """Hermitian Pauli i^{popcount(x & z)} X^x Z^z on masks (x, z); identity iff both zero."""

    x_mask: int
    z_mask: int

    def __post_init__(self):
        if self.x_mask < 0 or self.z_mask < 0:
            raise DimensionError("Pauli masks must be nonnegative")

    def fits(self, n_qubits: int) -> bool:
        return max(self.x_mask, self.z_mask) < (1 << n_qubits)

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    @property
    def weight(self) -> int:
        return int(popcount(self.x_mask | self.z_mask))

    def dense(self, n_qubits: int) -> np.ndarray:
        """Explicit 2^L x 2^L matrix (Kronecker construction, small L only)."""
        if not self.fits(n_qubits):
            raise DimensionError("Pauli mask wider than register")
        single = {(0, 0): PAULI_I, (1, 0): PAULI_X, (0, 1): PAULI_Z, (1, 1): PAULI_Y}
        out = np.array([[1.0 + 0j]])
        for site in range(n_qubits):  # site 0 = lowest bit = rightmost kron factor
            x = (self.x_mask >> site) & 1
            z = (self.z_mask >> site) & 1
            out = np.kron(single[(x, z)], out)
        return out


@dataclass(frozen=True)
class BitString:
    """Measurement outcome: bit i is the outcome on site i."""

    value: int
    n_bits: int

    def __post_init__(self):
        if not 0 <= self.value < (1 << self.n_bits):
            raise DimensionError(f"value {self.value} does not fit in {self.n_bits} bits")

    def bit(self, site: int) -> int:
        return (self.value >> site) & 1

    def to_array(self) -> np.ndarray:
        return np.array([self.bit(i) for i in range(self.n_bits)], dtype=np.uint8)

    def __str__(self):
        return "".join(str(self.bit(i)) for i in range(self.n_bits))


@dataclass
class StateVector:
    """Normalized pure state over 2^L computational basis states."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=complex)
        if self.n_qubits < 1:
            raise DimensionError("need at least one qubit")
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise DimensionError(
                f"amplitude array of length {self.amplitudes.size} does not match L={self.n_qubits}"
            )

    @classmethod
    def computational_basis(cls, n_qubits: int, index: int = 0) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "StateVector":
        amplitudes = np.asarray(amplitudes, dtype=complex)
        n = int(np.log2(amplitudes.size))
        if (1 << n) != amplitudes.size:
            raise DimensionError("amplitude length must be a power of two")
        return cls(n, amplitudes)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def check_normalized(self, tol: float = NORM_TOL) -> None:
        nrm = self.norm()
        if abs(nrm - 1.0) > tol:
            raise ContractError(f"state norm {nrm} deviates from 1 by more than {tol}")

    def renormalized(self) -> "StateVector":
        """Explicit renormalization; never applied silently elsewhere."""
        nrm = self.norm()
        if nrm == 0.0:
            raise ContractError("cannot renormalize the zero vector")
        return StateVector(self.n_qubits, self.amplitudes / nrm)

    def overlap(self, other: "StateVector") -> complex:
        if other.n_qubits != self.n_qubits:
            raise DimensionError("qubit counts differ")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        """Global-phase-invariant |<a|b>|^2."""
        return float(abs(self.overlap(other)) ** 2)

    def phase_distance(self, other: "StateVector") -> float:
        """sqrt(1 - fidelity): the norm of the component orthogonal to `other`.

        Linear in the amplitude error, so propagator order shows up directly.
        """
        return float(np.sqrt(max(0.0, 1.0 - self.fidelity(other))))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


def apply_pauli(state: StateVector, p: PauliString) -> StateVector:
    """Apply the Hermitian Pauli of `p`; involutive and norm-preserving.

    On a basis state, X^x Z^z |s> = (-1)^{z.s} |s ^ x|, so the new amplitude at s
    is i^{popcount(x&z)} (-1)^{z.(s^x)} psi(s ^ x).
    """
    if not p.fits(state.n_qubits):
        raise DimensionError(
            f"Pauli masks (x={p.x_mask:#x}, z={p.z_mask:#x}) exceed L={state.n_qubits}"
        )
    idx = np.arange(state.dim, dtype=np.uint64)
    parity = popcount(np.uint64(p.z_mask) & (idx ^ np.uint64(p.x_mask))) & 1
    phase = (1j) ** int(popcount(p.x_mask & p.z_mask))
    amps = phase * np.where(parity, -1.0, 1.0) * state.amplitudes[idx ^ np.uint64(p.x_mask)]
    return StateVector(state.n_qubits, amps)


def pauli_expectation(state: StateVector, p: PauliString) -> float:
    """<psi|P|psi> for the Hermitian Pauli; real and in [-1, 1] for normalized input."""
    state.check_normalized()
    val = complex(np.vdot(state.amplitudes, apply_pauli(state, p).amplitudes))
    if abs(val.imag) > 1e-10:
        raise ContractError(f"Pauli expectation has imaginary part {val.imag}")
    return float(val.real)


def apply_single_qubit_unitary(state: StateVector, site: int, u: np.ndarray) -> StateVector:
    """Apply a 2x2 unitary to one site, leaving all other tensor factors alone."""
    if not 0 <= site < state.n_qubits:
        raise DimensionError(f"site {site} outside register of {state.n_qubits} qubits")
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise DimensionError("single-qubit unitary must be 2x2")
    if np.max(np.abs(u.conj().T @ u - np.eye(2))) > UNITARY_TOL:
        raise ContractError("matrix is not unitary within 1e-10")
    low = 1 << site
    high = state.dim // (2 * low)
    block = state.amplitudes.reshape(high, 2, low)
    out = np.einsum("ab,hbl->hal", u, block)
    return StateVector(state.n_qubits, out.reshape(state.dim))


def apply_cz(state: StateVector, site_a: int, site_b: int) -> StateVector:
    """Controlled-Z between two sites (diagonal, symmetric)."""
    if site_a == site_b:
        raise DimensionError("CZ needs two distinct sites")
    idx = np.arange(state.dim, dtype=np.uint64)
    both = ((idx >> np.uint64(site_a)) & (idx >> np.uint64(site_b))) & np.uint64(1)
    amps = np.where(both.astype(bool), -state.amplitudes, state.amplitudes)
    return StateVector(state.n_qubits, amps)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """CNOT: flip `target` where bit `control` is set (basis-index permutation)."""
    if control == target:
        raise DimensionError("CNOT needs two distinct sites")
    idx = np.arange(state.dim, dtype=np.uint64)
    src = np.where(
        ((idx >> np.uint64(control)) & np.uint64(1)).astype(bool),
        idx ^ np.uint64(1 << target),
        idx,
    )
    return StateVector(state.n_qubits, state.amplitudes[src])


def sample_bitstring(state: StateVector, rng) -> BitString:
    """Draw one outcome s with probability |psi(s)|^2; deterministic under a fixed rng."""
    state.check_normalized()
    gen = as_generator(rng)
    probs = state.probabilities()
    probs = probs / probs.sum()
    outcome = int(gen.choice(state.dim, p=probs))
    return BitString(outcome, state.n_qubits)


def sample_bitstrings(state: StateVector, n_shots: int, rng) -> np.ndarray:
    """Vectorized repeated sampling; returns an int64 array of basis indices."""
    state.check_normalized()
    gen = as_generator(rng)
    probs = state.probabilities()
    probs = probs / probs.sum()
    return gen.choice(state.dim, size=n_shots, p=probs).astype(np.int64)


def tensor_product(a: StateVector, b: StateVector, max_qubits: int = MAX_QUBITS_DEFAULT) -> StateVector:
    """Combined state with `a` on sites 0..L_a-1 (low bits) and `b` above them."""
    total = a.n_qubits + b.n_qubits
    if total > max_qubits:
        raise ResourceError(f"combined register of {total} qubits exceeds the limit {max_qubits}")
    a.check_normalized()
    b.check_normalized()
    return StateVector(total, np.kron(b.amplitudes, a.amplitudes))


def product_state(single_site_states, max_qubits: int = MAX_QUBITS_DEFAULT) -> StateVector:
    """Product state from an iterable of per-site (a0, a1) amplitude pairs, site 0 first."""
    amps = np.array([1.0 + 0j])
    count = 0
    for pair in single_site_states:
        count += 1
        if count > max_qubits:
            raise ResourceError(f"product state exceeds the {max_qubits}-qubit limit")
        pair = np.asarray(pair, dtype=complex).reshape(2)
        amps = np.kron(pair, amps)
    if count == 0:
        raise DimensionError("need at least one site")
    return StateVector(count, amps)


def random_state(n_qubits: int, rng) -> StateVector:
    """Haar-random pure state (Gaussian vector, normalized)."""
    gen = as_generator(rng)
    vec = gen.normal(size=1 << n_qubits) + 1j * gen.normal(size=1 << n_qubits)
    return StateVector(n_qubits, vec / np.linalg.norm(vec))


def save_state_raw(state: StateVector, path) -> None:
    """Snapshot layout: little-endian float64 pairs (re, im) per amplitude,
    basis index ascending, no header; length fixes L."""
    inter = np.empty(2 * state.dim, dtype="<f8")
    inter[0::2] = state.amplitudes.real
    inter[1::2] = state.amplitudes.imag
    with open(path, "wb") as fh:
        fh.write(inter.tobytes())


def load_state_raw(path) -> StateVector:
    inter = np.frombuffer(open(path, "rb").read(), dtype="<f8")
    if inter.size % 2:
        raise DimensionError("corrupt snapshot: odd float count")
    return StateVector.from_amplitudes(inter[0::2] + 1j * inter[1::2])
