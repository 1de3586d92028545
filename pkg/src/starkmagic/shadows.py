"""Local-Clifford randomized measurements and the U-statistic estimators.

A measurement setting applies one of the 24 single-qubit Cliffords per site,
then reads all qubits in the computational basis N_M times.  From the same
bitstrings the kernels

    K2(u, v) = (-2)^{-wt(u ^ v)}        (pairs, purity)
    K4(u1..u4) = (-2)^{-wt(u1^u2^u3^u4)} (quadruples, Pauli fourth moment)

give unbiased estimates of subsystem/global purity Tr rho_A^2 and of
W = D^{-2} sum_P <P>^4, and the mixedness-consistent magic estimate
M2 = -log2(D W / Tr rho^2).

Estimates are reported raw (possibly negative); only derived logarithms apply
a guarded clip, and then carry a flag.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import ContractError, DimensionError
from .states import (
    HADAMARD,
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    PHASE_S,
    StateVector,
    as_generator,
    popcount,
)

# ---------------------------------------------------------------------------
# the canonical single-qubit Clifford table
# ---------------------------------------------------------------------------
# index c = 4 * v + p with axis-permutation layer v in 0..5 and Pauli layer
# p in 0..3; unitary = AXIS[v] @ PAULI[p].  The six axis words are the coset
# representatives {I, H, S, HS, SH, HSH} of C1 modulo the Pauli layer.
_AXIS_WORDS = (
    ("I", PAULI_I),
    ("H", HADAMARD),
    ("S", PHASE_S),
    ("HS", HADAMARD @ PHASE_S),
    ("SH", PHASE_S @ HADAMARD),
    ("HSH", HADAMARD @ PHASE_S @ HADAMARD),
)
_PAULI_LAYER = (("I", PAULI_I), ("X", PAULI_X), ("Y", PAULI_Y), ("Z", PAULI_Z))

CLIFFORD_NAMES = tuple(f"{a}.{p}" for a, _ in _AXIS_WORDS for p, _ in _PAULI_LAYER)
CLIFFORD_TABLE = np.stack([am @ pm for _, am in _AXIS_WORDS for _, pm in _PAULI_LAYER])


def _check_table() -> None:
    # unitary, and pairwise distinct up to global phase
    for u in CLIFFORD_TABLE:
        assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12)
    for i in range(24):
        for j in range(i + 1, 24):
            ov = abs(np.trace(CLIFFORD_TABLE[i].conj().T @ CLIFFORD_TABLE[j])) / 2
            assert ov < 1.0 - 1e-9, (i, j)


_check_table()

MixtureComponent = tuple[float, StateVector]
StateOrMixture = Union[StateVector, Sequence[MixtureComponent]]


def _normalize_input(state: StateOrMixture) -> list[MixtureComponent]:
    if isinstance(state, StateVector):
        return [(1.0, state)]
    comps = [(float(w), s) for w, s in state]
    total = sum(w for w, _ in comps)
    if abs(total - 1.0) > 1e-9 or any(w < 0 for w, _ in comps):
        raise ContractError("mixture weights must be nonnegative and sum to 1")
    return comps


@dataclass(frozen=True)
class CliffordSetting:
    """Per-site indices into the canonical 24-element table."""

    indices: tuple[int, ...]

    def __post_init__(self):
        if any(not 0 <= c < 24 for c in self.indices):
            raise DimensionError("Clifford indices must be in 0..23")

    def unitary(self, site: int) -> np.ndarray:
        return CLIFFORD_TABLE[self.indices[site]]


@dataclass
class ShotBatch:
    """All bitstring data for one time point: N_U settings x N_M shots.

    `shots[m, k]` is the basis index of shot k under setting m; `subsystem`
    is the default site set for restricted (purity) kernels.
    """

    L: int
    settings: np.ndarray  # (N_U, L) uint8
    shots: np.ndarray  # (N_U, N_M) int64
    subsystem: tuple[int, ...]
    seed: int = 0

    def __post_init__(self):
        self.settings = np.asarray(self.settings, dtype=np.uint8)
        self.shots = np.asarray(self.shots, dtype=np.int64)
        if self.settings.ndim != 2 or self.settings.shape[1] != self.L:
            raise DimensionError("settings must be (N_U, L)")
        if self.shots.shape[0] != self.settings.shape[0]:
            raise DimensionError("shots and settings disagree on N_U")

    @property
    def n_settings(self) -> int:
        return self.settings.shape[0]

    @property
    def n_shots(self) -> int:
        return self.shots.shape[1]

    @property
    def n_total(self) -> int:
        """Total single-shot budget N_U * N_M."""
        return self.n_settings * self.n_shots

    def subsystem_mask(self) -> int:
        mask = 0
        for site in self.subsystem:
            mask |= 1 << site
        return mask

    # -- persistence: little-endian header + raw columns -------------------
    _MAGIC = b"SMSB1\x00"

    def save(self, path) -> None:
        """Columnar dump: header(L, N_U, N_M, seed, A-mask) + settings + shots."""
        with open(path, "wb") as fh:
            fh.write(self._MAGIC)
            fh.write(struct.pack("<IIIqQ", self.L, self.n_settings, self.n_shots,
                                 self.seed, self.subsystem_mask()))
            fh.write(self.settings.astype("<u1").tobytes())
            fh.write(self.shots.astype("<i8").tobytes())

    @classmethod
    def load(cls, path) -> "ShotBatch":
        with open(path, "rb") as fh:
            if fh.read(len(cls._MAGIC)) != cls._MAGIC:
                raise ContractError(f"{path} is not a shot-batch file")
            L, n_u, n_m, seed, mask = struct.unpack("<IIIqQ", fh.read(28))
            settings = np.frombuffer(fh.read(n_u * L), dtype="<u1").reshape(n_u, L)
            shots = np.frombuffer(fh.read(n_u * n_m * 8), dtype="<i8").reshape(n_u, n_m)
        subsystem = tuple(i for i in range(L) if (mask >> i) & 1)
        return cls(L, settings.copy(), shots.copy(), subsystem, seed)


@dataclass(frozen=True)
class EstimatorResult:
    """Point estimate with spread; intervals are percentile once bootstrapped."""

    value: float
    stderr: float
    ci68: tuple[float, float]
    ci95: tuple[float, float]
    n_bootstrap: int = 0
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        lo68, hi68 = self.ci68
        lo95, hi95 = self.ci95
        if not (np.isnan(lo68) or (lo95 <= lo68 <= hi68 <= hi95)):
            raise ContractError("ci68 must nest inside ci95")


def _result_from_setting_values(values: np.ndarray, flags: tuple[str, ...] = ()) -> EstimatorResult:
    value = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
    return EstimatorResult(
        value=value,
        stderr=stderr,
        ci68=(value - stderr, value + stderr),
        ci95=(value - 1.96 * stderr, value + 1.96 * stderr),
        flags=flags,
    )


def _rotated_probabilities(psi: np.ndarray, L: int, settings: np.ndarray) -> np.ndarray:
    """(chunk, 2^L) outcome distributions of C^{(m)}|psi> for a chunk of settings."""
    n = settings.shape[0]
    amps = np.broadcast_to(psi, (n, psi.size)).copy()
    for site in range(L):
        u = CLIFFORD_TABLE[settings[:, site]]  # (n, 2, 2)
        low = 1 << site
        block = amps.reshape(n, psi.size // (2 * low), 2, low)
        amps = np.einsum("mab,mhbl->mhal", u, block).reshape(n, psi.size)
    probs = np.abs(amps) ** 2
    return probs / probs.sum(axis=1, keepdims=True)


_SAMPLER_CHUNK = 256


def sample_settings_and_shots(
    state: StateOrMixture,
    n_settings: int,
    n_shots: int,
    rng,
    subsystem: Optional[Sequence[int]] = None,
    seed_label: int = 0,
) -> ShotBatch:
    """Draw uniform local-Clifford settings and simulate the computational-basis shots.

    Mixtures are sampled faithfully: each shot first picks a pure component,
    then a bitstring from the rotated component.  Vectorized in chunks of
    settings; deterministic under a fixed rng.
    """
    comps = _normalize_input(state)
    L = comps[0][1].n_qubits
    if any(s.n_qubits != L for _, s in comps):
        raise DimensionError("mixture components differ in size")
    for _, s in comps:
        s.check_normalized()
    if n_settings < 1 or n_shots < 1:
        raise ContractError("need n_settings >= 1 and n_shots >= 1")
    gen = as_generator(rng)
    settings = gen.integers(0, 24, size=(n_settings, L), dtype=np.uint8)
    weights = np.array([w for w, _ in comps])
    shots = np.empty((n_settings, n_shots), dtype=np.int64)
    for lo in range(0, n_settings, _SAMPLER_CHUNK):
        hi = min(lo + _SAMPLER_CHUNK, n_settings)
        chunk = settings[lo:hi]
        cdfs = [np.cumsum(_rotated_probabilities(s.amplitudes, L, chunk), axis=1)
                for _, s in comps]
        u = gen.random(size=(hi - lo, n_shots))
        if len(comps) == 1:
            which = np.zeros((hi - lo, n_shots), dtype=np.int64)
        else:
            which = gen.choice(len(comps), size=(hi - lo, n_shots), p=weights)
        out = np.empty((hi - lo, n_shots), dtype=np.int64)
        for c, cdf in enumerate(cdfs):
            # row-wise inverse-CDF: count of cdf entries strictly below u
            idx = (cdf[:, None, :] < u[:, :, None]).sum(axis=2)
            np.copyto(out, idx, where=(which == c))
        shots[lo:hi] = np.minimum(out, (1 << L) - 1)
    subsystem = tuple(range(L // 2)) if subsystem is None else tuple(subsystem)
    return ShotBatch(L, settings, shots, subsystem, seed=seed_label)


#: (-2)^{-k} for k = 0..64, indexed by Hamming weight
_NEG_HALF_POW = (-0.5) ** np.arange(65)


def k2_kernel(u, v, subset_mask: Optional[int] = None) -> np.ndarray:
    """Pair kernel (-2)^{-wt((u ^ v) restricted to the subset)}; symmetric."""
    x = np.asarray(u, dtype=np.int64) ^ np.asarray(v, dtype=np.int64)
    if subset_mask is not None:
        x = x & np.int64(subset_mask)
    return _NEG_HALF_POW[popcount(x)]


def _mask_from_sites(batch: ShotBatch, subset: Optional[Sequence[int]]) -> int:
    if subset is None:
        return batch.subsystem_mask()
    mask = 0
    for site in subset:
        if not 0 <= site < batch.L:
            raise DimensionError(f"site {site} outside register")
        mask |= 1 << site
    return mask


def purity_setting_values(batch: ShotBatch, mask: int) -> np.ndarray:
    """Per-setting 2^{|A|} (1/(N_M (N_M - 1))) sum_{a != b} K2 on restricted strings.

    The 2^{|A|} prefactor makes the pair-kernel mean unbiased for Tr rho_A^2
    under the single-qubit Clifford design (per site the twirl averages K2 to
    (1/4) sum_p <p>^2 = Tr rho^2 / 2).
    """
    if batch.n_shots < 2:
        raise ContractError("purity estimation needs N_M >= 2")
    s = batch.shots & np.int64(mask)
    kern = _NEG_HALF_POW[popcount(s[:, :, None] ^ s[:, None, :])]
    n_m = batch.n_shots
    pair_sum = kern.sum(axis=(1, 2)) - n_m  # remove the diagonal (kernel 1 each)
    scale = 2.0 ** int(popcount(mask))
    return scale * pair_sum / (n_m * (n_m - 1))


def purity_estimator(batch: ShotBatch, subset: Optional[Sequence[int]] = None) -> EstimatorResult:
    """Unbiased Tr rho_subset^2; `subset=None` uses the batch's stored subsystem.

    Pass `subset=range(L)` for the global purity.  The raw value is reported
    unclipped; clipping happens only in derived entropies.
    """
    mask = _mask_from_sites(batch, subset)
    return _result_from_setting_values(purity_setting_values(batch, mask))


def global_purity_estimator(batch: ShotBatch) -> EstimatorResult:
    return purity_estimator(batch, subset=range(batch.L))


def renyi2_from_purity(p: float, n_sites: int) -> tuple[float, tuple[str, ...]]:
    """S2 = -log2(p) in bits; non-positive estimates are clipped and flagged."""
    if p > 0:
        return float(-np.log2(p)), ()
    clip = 2.0 ** (-n_sites) / 10.0
    return float(-np.log2(clip)), ("nonpositive_purity_clipped",)


def _quadruple_indices(n_shots: int) -> tuple[np.ndarray, ...]:
    combos = np.array(list(combinations(range(n_shots), 4)), dtype=np.int64)
    return combos[:, 0], combos[:, 1], combos[:, 2], combos[:, 3]


def w_setting_values(batch: ShotBatch) -> np.ndarray:
    """Per-setting fourth-moment U-statistic over all C(N_M, 4) quadruples."""
    if batch.n_shots < 4:
        raise ContractError("fourth-moment estimation needs N_M >= 4")
    i0, i1, i2, i3 = _quadruple_indices(batch.n_shots)
    out = np.empty(batch.n_settings)
    chunk = max(1, 4_000_000 // max(1, i0.size))  # cap the quadruple workspace
    for lo in range(0, batch.n_settings, chunk):
        s = batch.shots[lo : lo + chunk]
        x = s[:, i0] ^ s[:, i1]
        x ^= s[:, i2]
        x ^= s[:, i3]
        out[lo : lo + chunk] = _NEG_HALF_POW[popcount(x)].mean(axis=1)
    return out


def w_estimator(batch: ShotBatch) -> EstimatorResult:
    """Unbiased estimate of W = D^{-2} sum_P <P>^4 over the full register."""
    return _result_from_setting_values(w_setting_values(batch))


def m2_setting_arrays(batch: ShotBatch) -> tuple[np.ndarray, np.ndarray]:
    """(per-setting W, per-setting global purity) for joint resampling."""
    full_mask = (1 << batch.L) - 1
    return w_setting_values(batch), purity_setting_values(batch, full_mask)


def _m2_from_means(L: int, w_mean: float, p_mean: float) -> tuple[float, tuple[str, ...]]:
    if w_mean <= 0 or p_mean <= 0:
        return float("nan"), ("nonpositive_moment",)
    return float(-np.log2((1 << L) * w_mean / p_mean)), ()


def m2_estimator(batch: ShotBatch) -> EstimatorResult:
    """Mixedness-corrected magic M2 = -log2(D W / P) from one batch.

    stderr comes from the delta method on the jointly-estimated (W, P) means;
    bootstrap_ci refines the intervals.  Non-positive moments flag the result
    instead of being clamped.
    """
    w_vals, p_vals = m2_setting_arrays(batch)
    n = batch.n_settings
    w_mean, p_mean = float(np.mean(w_vals)), float(np.mean(p_vals))
    value, flags = _m2_from_means(batch.L, w_mean, p_mean)
    if flags:
        nan = float("nan")
        return EstimatorResult(value, nan, (nan, nan), (nan, nan), flags=flags)
    cov = np.cov(np.stack([w_vals, p_vals])) / n if n > 1 else np.zeros((2, 2))
    grad = np.array([-1.0 / (np.log(2.0) * w_mean), 1.0 / (np.log(2.0) * p_mean)])
    stderr = float(np.sqrt(max(0.0, grad @ cov @ grad)))
    return EstimatorResult(
        value=value,
        stderr=stderr,
        ci68=(value - stderr, value + stderr),
        ci95=(value - 1.96 * stderr, value + 1.96 * stderr),
    )


Estimator = Callable[[ShotBatch], EstimatorResult]


def bootstrap_ci(
    batch: ShotBatch,
    estimator: Estimator,
    n_resamples: int = 1000,
    rng=0,
) -> EstimatorResult:
    """Percentile intervals by resampling the Clifford-setting index.

    Within-setting shot structure is preserved: whole (setting, shots) rows
    are drawn with replacement, so every estimator recomputes on a valid batch.
    """
    if batch.n_settings < 10:
        raise ContractError("bootstrap needs N_U >= 10")
    gen = as_generator(rng)
    base = estimator(batch)
    values = np.empty(n_resamples)
    for b in range(n_resamples):
        pick = gen.integers(0, batch.n_settings, size=batch.n_settings)
        resampled = replace(batch, settings=batch.settings[pick], shots=batch.shots[pick])
        values[b] = estimator(resampled).value
    values = values[~np.isnan(values)]
    if values.size == 0:
        return replace(base, n_bootstrap=n_resamples, flags=base.flags + ("bootstrap_all_nan",))
    lo68, hi68 = np.percentile(values, [16.0, 84.0])
    lo95, hi95 = np.percentile(values, [2.5, 97.5])
    lo68, hi68 = max(lo68, lo95), min(hi68, hi95)  # guard percentile crossing at zero width
    return EstimatorResult(
        value=base.value,
        stderr=float(np.std(values, ddof=1)) if values.size > 1 else 0.0,
        ci68=(float(lo68), float(hi68)),
        ci95=(float(lo95), float(hi95)),
        n_bootstrap=n_resamples,
        flags=base.flags,
    )
