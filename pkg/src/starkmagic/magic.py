"""Stabilizer Rényi entropies, entanglement spectra, and quench traces.

The full table of squared Pauli expectations |<X^a Z^b>|^2 is obtained with
one length-2^L Walsh–Hadamard transform per x-mask a applied to
f_a(s) = conj(psi(s ^ a)) psi(s), for a total cost O(L 4^L).  The Hermitian
phase i^{popcount(a & b)} drops under the modulus, so the transform never
tracks it.  Entropies are base-2 throughout (bits).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import ContractError, DimensionError, DomainError, ResourceError
from .evolution import EigenPropagator, KrylovConfig, TimeGrid, exact_evolve
from .hamiltonian import SparseHamiltonian
from .states import MAX_QUBITS_DEFAULT, StateVector

#: above this size the moment table is streamed instead of materialized
STREAM_THRESHOLD = 13
#: x-mask batch rows per transform pass (memory = 2 * batch * 2^L complex)
_BATCH_ROWS = 256


def fwht_inplace(a: np.ndarray) -> np.ndarray:
    """Walsh–Hadamard transform (kernel (-1)^{popcount(b & s)}) along the last axis."""
    n = a.shape[-1]
    if n & (n - 1):
        raise DimensionError("transform length must be a power of two")
    h = 1
    while h < n:
        view = a.reshape(-1, n // (2 * h), 2, h)
        u = view[:, :, 0, :].copy()
        view[:, :, 0, :] += view[:, :, 1, :]
        view[:, :, 1, :] = u - view[:, :, 1, :]
        h *= 2
    return a


@dataclass
class PauliMomentTable:
    """|<X^a Z^b>|^2 for all 4^L Pauli strings, indexed [a, b]."""

    L: int
    moments: np.ndarray

    def __post_init__(self):
        dim = 1 << self.L
        self.moments = np.asarray(self.moments, dtype=float).reshape(dim, dim)

    def validate(self, atol_purity: float = 1e-6) -> None:
        """Pure-state sanity: entry (0,0) = 1, all in [0,1], total = 2^L."""
        if abs(self.moments[0, 0] - 1.0) > 1e-10:
            raise ContractError("identity moment differs from 1")
        if self.moments.min() < -1e-12 or self.moments.max() > 1.0 + 1e-10:
            raise ContractError("moments outside [0, 1]")
        total = float(self.moments.sum())
        if abs(total - (1 << self.L)) > atol_purity * (1 << self.L):
            raise ContractError(f"Pauli purity identity violated: sum={total}")

    def stabilizer_purity(self, alpha: float) -> float:
        return float(np.sum(self.moments**alpha)) / (1 << self.L)


def _moment_blocks(psi: np.ndarray, L: int, batch_rows: int = _BATCH_ROWS):
    """Yield (x-mask block, |<X^a Z^b>|^2 rows) without materializing all of them."""
    dim = 1 << L
    idx = np.arange(dim, dtype=np.int64)
    rows = min(batch_rows, dim)
    for a0 in range(0, dim, rows):
        a = np.arange(a0, min(a0 + rows, dim), dtype=np.int64)
        block = np.conj(psi[idx[None, :] ^ a[:, None]]) * psi[None, :]
        fwht_inplace(block)
        yield a, np.abs(block) ** 2


def pauli_moment_transform(
    state: StateVector, max_qubits: int = MAX_QUBITS_DEFAULT
) -> PauliMomentTable:
    """Full moment table; memory 4^L floats, so capped below the streaming regime."""
    L = state.n_qubits
    if L > max_qubits or L >= STREAM_THRESHOLD:
        raise ResourceError(
            f"4^{L} moment table too large to materialize; stream via sre() instead"
        )
    state.check_normalized()
    dim = 1 << L
    table = np.empty((dim, dim))
    for a, rows in _moment_blocks(state.amplitudes, L):
        table[a[0] : a[-1] + 1] = rows
    return PauliMomentTable(L, table)


@dataclass(frozen=True)
class MagicResult:
    """Stabilizer Rényi entropy of one state at one order, with the Haar reference."""

    alpha: float
    p_alpha: float
    m_alpha: float
    m_haar: float

    @property
    def delta_m2(self) -> float:
        return self.m_haar - self.m_alpha


def haar_reference(L: int) -> float:
    """Expected SRE-2 of a Haar-random pure state: log2(2^L + 3) - 2 bits."""
    if L < 1:
        raise DomainError("need L >= 1")
    return float(np.log2((1 << L) + 3.0) - 2.0)


def sre(state: StateVector, alpha: float = 2.0, max_qubits: int = MAX_QUBITS_DEFAULT) -> MagicResult:
    """Stabilizer Rényi entropy M_alpha in bits (alpha=2 by default).

    M_alpha = log2(P_alpha) / (1 - alpha) with the stabilizer purity
    P_alpha = 2^{-L} sum_P |<P>|^{2 alpha}; alpha = 1 falls back to the
    Shannon limit of the normalized moment distribution.  Streams over
    x-mask batches, so memory stays O(2^L).
    """
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    L = state.n_qubits
    if L > max_qubits:
        raise ResourceError(f"L={L} above limit {max_qubits}")
    state.check_normalized()
    dim = 1 << L
    if alpha == 1.0:
        acc = 0.0
        for _, rows in _moment_blocks(state.amplitudes, L):
            xi = rows / dim
            nz = xi > 0.0
            acc -= float(np.sum(xi[nz] * np.log2(xi[nz])))
        m_alpha = acc - L
        p_alpha = float("nan")
    else:
        acc = 0.0
        for _, rows in _moment_blocks(state.amplitudes, L):
            acc += float(np.sum(rows**alpha))
        p_alpha = acc / dim
        m_alpha = float(np.log2(p_alpha) / (1.0 - alpha))
    # clip the -0.0 that rounding gives exact stabilizer states
    if -1e-12 < m_alpha < 0.0:
        m_alpha = 0.0
    return MagicResult(alpha=alpha, p_alpha=p_alpha, m_alpha=m_alpha, m_haar=haar_reference(L))


@dataclass
class EntanglementResult:
    """Reduced-state spectrum across one cut plus the derived entropies (bits)."""

    cut: tuple[int, ...]
    renyi2: float
    von_neumann: float
    spectrum: np.ndarray
    degenerate: bool = False

    def renyi(self, alpha: float) -> float:
        return renyi_entropy(self.spectrum, alpha)


def renyi_entropy(spectrum: np.ndarray, alpha: float) -> float:
    """S_alpha of a probability spectrum, in bits; alpha=1 is von Neumann."""
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    lam = np.asarray(spectrum, dtype=float)
    lam = lam[lam > 1e-300]
    if alpha == 1.0:
        return float(-np.sum(lam * np.log2(lam)))
    return float(np.log2(np.sum(lam**alpha)) / (1.0 - alpha))


def half_chain_cut(L: int) -> tuple[int, ...]:
    """Left half {0 .. L/2 - 1} (L/2 rounds down for odd L)."""
    return tuple(range(L // 2))


def reduced_spectrum(state: StateVector, cut: Sequence[int]) -> np.ndarray:
    """Eigenvalues of rho_cut via SVD of the bipartition matrix (descending)."""
    L = state.n_qubits
    sites = sorted(set(int(c) for c in cut))
    if sites and (sites[0] < 0 or sites[-1] >= L):
        raise DimensionError("cut sites outside register")
    rest = [i for i in range(L) if i not in sites]
    tensor = state.amplitudes.reshape((2,) * L)
    # axis of site i is L-1-i under C-order reshape
    perm = [L - 1 - i for i in sites] + [L - 1 - i for i in rest]
    matrix = tensor.transpose(perm).reshape(1 << len(sites), 1 << len(rest))
    svals = np.linalg.svd(matrix, compute_uv=False)
    return svals**2


def renyi_entanglement(
    state: StateVector,
    cut: Optional[Sequence[int]] = None,
    alphas: Iterable[float] = (1.0, 2.0),
) -> EntanglementResult:
    """Entanglement entropies of the reduced state on `cut` (default: left half)."""
    state.check_normalized()
    L = state.n_qubits
    sites = half_chain_cut(L) if cut is None else tuple(sorted(set(int(c) for c in cut)))
    if len(sites) == 0 or len(sites) == L:
        return EntanglementResult(
            cut=sites, renyi2=0.0, von_neumann=0.0, spectrum=np.array([1.0]), degenerate=True
        )
    lam = reduced_spectrum(state, sites)
    _ = [renyi_entropy(lam, a) for a in alphas]  # domain-check requested orders
    return EntanglementResult(
        cut=sites,
        renyi2=renyi_entropy(lam, 2.0),
        von_neumann=renyi_entropy(lam, 1.0),
        spectrum=lam,
    )


@dataclass
class QuenchTrace:
    """Per-time diagnostics for one quench (possibly averaged over an ensemble).

    Arrays are (n_samples, n_times); NaN marks time points where a diagnostic
    was skipped (subsampled M2 grids).
    """

    times: np.ndarray
    m2: np.ndarray
    s2_half: np.ndarray
    s1_half: np.ndarray
    energy: np.ndarray
    m_haar: float
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.m2.shape[0]

    @staticmethod
    def _column_mean(arr: np.ndarray) -> np.ndarray:
        valid = ~np.isnan(arr)
        counts = valid.sum(axis=0)
        sums = np.where(valid, arr, 0.0).sum(axis=0)
        return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)

    def mean_m2(self) -> np.ndarray:
        return self._column_mean(self.m2)

    def mean_s2(self) -> np.ndarray:
        return self._column_mean(self.s2_half)

    def mean_s1(self) -> np.ndarray:
        return self._column_mean(self.s1_half)

    def rows(self):
        """Flat (sample_id, t, m2, s2, s1, energy) records for CSV writing."""
        for s in range(self.n_samples):
            for j, t in enumerate(self.times):
                yield (
                    s,
                    float(t),
                    float(self.m2[s, j]),
                    float(self.s2_half[s, j]),
                    float(self.s1_half[s, j]),
                    float(self.energy[s, j]),
                )


def quench_trace(
    ham: SparseHamiltonian,
    psi0: Union[StateVector, Sequence[StateVector]],
    grid: TimeGrid,
    cut: Optional[Sequence[int]] = None,
    propagator: str = "auto",
    krylov: KrylovConfig = KrylovConfig(),
    m2_indices: Optional[Sequence[int]] = None,
    max_qubits: int = MAX_QUBITS_DEFAULT,
    meta: Optional[dict] = None,
    state_sink=None,
) -> QuenchTrace:
    """Evolve one state (or an ensemble) and record M2, half-chain entropies, <H>.

    `propagator` is "krylov", "eigen", or "auto" (eigen when the dense solve
    fits, Krylov otherwise).  `m2_indices` restricts the expensive M2
    evaluation to a subset of grid points (others become NaN).  `state_sink`,
    when given, receives (sample_id, time_index, state) for every evolved
    state (snapshot persistence hooks in here).
    """
    states0 = [psi0] if isinstance(psi0, StateVector) else list(psi0)
    n_t = len(grid)
    which_m2 = set(range(n_t)) if m2_indices is None else set(int(i) for i in m2_indices)
    cut_sites = half_chain_cut(ham.L) if cut is None else tuple(cut)

    if propagator == "auto":
        propagator = "eigen" if ham.L <= 12 else "krylov"
    prop = EigenPropagator.build(ham) if propagator == "eigen" else None

    shape = (len(states0), n_t)
    m2 = np.full(shape, np.nan)
    s2 = np.full(shape, np.nan)
    s1 = np.full(shape, np.nan)
    energy = np.full(shape, np.nan)
    for s_id, state0 in enumerate(states0):
        if propagator == "eigen":
            evolved = (prop.at(state0, t) for t in grid.points)
        elif propagator == "krylov":
            evolved = iter(exact_evolve(ham, state0, grid, krylov))
        else:
            raise DomainError(f"unknown propagator {propagator!r}")
        for j, state in enumerate(evolved):
            if state_sink is not None:
                state_sink(s_id, j, state)
            ent = renyi_entanglement(state, cut_sites)
            s2[s_id, j] = ent.renyi2
            s1[s_id, j] = ent.von_neumann
            energy[s_id, j] = ham.expectation(state)
            if j in which_m2:
                m2[s_id, j] = sre(state, 2.0, max_qubits=max_qubits).m_alpha
    return QuenchTrace(
        times=grid.points.copy(),
        m2=m2,
        s2_half=s2,
        s1_half=s1,
        energy=energy,
        m_haar=haar_reference(ham.L),
        meta=dict(meta or {}),
    )
