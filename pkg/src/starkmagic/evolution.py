"""Quench propagators: Lanczos/Krylov exp(-iHt), dense spectral reference, Strang steps.

All propagators are unitary up to stated tolerances and compare via
global-phase-invariant fidelity |<a|b>|^2 (the tilt's index-offset convention
only shifts the global phase).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.linalg

from .errors import ConfigError, ConvergenceError, DimensionError, ResourceError
from .hamiltonian import ModelSpec, SparseHamiltonian, build_hamiltonian
from .states import StateVector, rotation_x

EIGEN_MAX_QUBITS = 12


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times t >= 0, in units of 1/J."""

    points: np.ndarray
    spacing: str = "custom"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size == 0:
            raise ConfigError("time grid must be a nonempty 1-d array")
        if pts[0] < 0 or np.any(np.diff(pts) <= 0):
            raise ConfigError("time grid must be strictly increasing and nonnegative")

    @classmethod
    def linear(cls, t_min: float, t_max: float, n_points: int) -> "TimeGrid":
        return cls(np.linspace(t_min, t_max, n_points), "linear")

    @classmethod
    def logarithmic(cls, t_min: float, t_max: float, n_points: int) -> "TimeGrid":
        if t_min <= 0:
            raise ConfigError("logarithmic grid needs t_min > 0")
        return cls(np.geomspace(t_min, t_max, n_points), "logarithmic")

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class KrylovConfig:
    """Lanczos subspace size and the per-substep residual target."""

    m: int = 30
    tol: float = 1e-10
    max_dt: Optional[float] = None

    def __post_init__(self):
        if self.m < 2:
            raise ConfigError("Krylov subspace dimension must be >= 2")
        if self.tol <= 0:
            raise ConfigError("Krylov tolerance must be positive")


@dataclass(frozen=True)
class StrangStepSpec:
    """Symmetric second-order step; angles always derive from (h, F, dt).

    theta = 2 h dt is the per-step X-rotation angle and phi_i = 2 F i dt the
    per-site tilt phases; they are recomputed, never stored independently.
    """

    dt: float
    h: float
    F: float
    n_steps: int = 1

    def __post_init__(self):
        if self.dt < 0:
            raise ConfigError("Strang step size must be nonnegative")
        if self.n_steps < 0:
            raise ConfigError("step count must be nonnegative")

    @classmethod
    def from_model(cls, model: ModelSpec, dt: float, n_steps: int = 1) -> "StrangStepSpec":
        return cls(dt=dt, h=model.h, F=model.F, n_steps=n_steps)

    @property
    def theta(self) -> float:
        return 2.0 * self.h * self.dt

    def phis(self, L: int) -> np.ndarray:
        return 2.0 * self.F * self.dt * np.arange(L)


def _lanczos_expm_step(
    ham: SparseHamiltonian, psi: np.ndarray, dt: float, cfg: KrylovConfig
) -> tuple[np.ndarray, float]:
    """One Krylov application of exp(-i dt H); returns (new psi, residual estimate)."""
    m = min(cfg.m, ham.dim)
    V = np.empty((m, ham.dim), dtype=complex)
    alphas = np.zeros(m)
    betas = np.zeros(m)
    V[0] = psi
    w = ham.matvec(V[0])
    alphas[0] = np.real(np.vdot(V[0], w))
    w = w - alphas[0] * V[0]
    k = m
    beta_next = 0.0
    for j in range(1, m):
        beta = np.linalg.norm(w)
        if beta < 1e-13 * max(1.0, abs(alphas[j - 1])):
            k = j  # happy breakdown: subspace is invariant
            beta_next = 0.0
            break
        V[j] = w / beta
        betas[j - 1] = beta
        w = ham.matvec(V[j]) - beta * V[j - 1]
        alphas[j] = np.real(np.vdot(V[j], w))
        w = w - alphas[j] * V[j]
        # full reorthogonalization keeps long propagations norm-clean
        w = w - V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta_next = float(np.linalg.norm(w))
    evals, evecs = scipy.linalg.eigh_tridiagonal(alphas[:k], betas[: k - 1])
    y = evecs @ (np.exp(-1j * dt * evals) * evecs[0, :])
    residual = float(beta_next * abs(dt) * abs(y[-1])) if k == m else 0.0
    return y @ V[:k], residual


def _propagate_interval(
    ham: SparseHamiltonian, psi: np.ndarray, duration: float, cfg: KrylovConfig
) -> np.ndarray:
    """Advance by `duration`, adaptively subdividing until each residual <= tol."""
    if duration == 0.0:
        return psi
    remaining = duration
    dt = duration if cfg.max_dt is None else min(duration, cfg.max_dt)
    while remaining > 1e-15 * duration:
        dt = min(dt, remaining)
        candidate, residual = _lanczos_expm_step(ham, psi, dt, cfg)
        if residual > cfg.tol:
            if dt < 1e-12 * duration:
                raise ConvergenceError(
                    f"Krylov residual {residual:.3e} above tol {cfg.tol:.1e} at dt={dt:.3e}",
                    residual=residual,
                )
            dt *= 0.5
            continue
        psi = candidate
        remaining -= dt
        if residual < 0.01 * cfg.tol:
            dt *= 2.0
    return psi


def exact_evolve(
    ham: SparseHamiltonian,
    psi0: StateVector,
    grid: TimeGrid,
    cfg: KrylovConfig = KrylovConfig(),
) -> list[StateVector]:
    """States exp(-i H t)|psi0> at every grid point (Krylov, residual-controlled)."""
    if psi0.n_qubits != ham.L:
        raise DimensionError("state size does not match Hamiltonian")
    psi0.check_normalized()
    out = []
    psi = psi0.amplitudes.copy()
    t_prev = 0.0
    for t in grid.points:
        psi = _propagate_interval(ham, psi, t - t_prev, cfg)
        t_prev = t
        out.append(StateVector(ham.L, psi.copy()))
    return out


@dataclass
class EigenPropagator:
    """Dense spectral decomposition; machine-accurate reference for L <= 12."""

    ham: SparseHamiltonian
    evals: np.ndarray
    evecs: np.ndarray

    @classmethod
    def build(cls, ham: SparseHamiltonian) -> "EigenPropagator":
        if ham.L > EIGEN_MAX_QUBITS:
            raise ResourceError(f"dense diagonalization capped at L={EIGEN_MAX_QUBITS}")
        evals, evecs = scipy.linalg.eigh(ham.dense())
        return cls(ham, evals, evecs)

    def at(self, psi0: StateVector, t: float) -> StateVector:
        # V is real; split the complex vector to keep the GEMVs in float64
        a = psi0.amplitudes
        coeffs = (self.evecs.T @ a.real) + 1j * (self.evecs.T @ a.imag)
        coeffs *= np.exp(-1j * t * self.evals)
        amps = (self.evecs @ coeffs.real) + 1j * (self.evecs @ coeffs.imag)
        return StateVector(self.ham.L, amps)


def eigen_evolve(ham: SparseHamiltonian, psi0: StateVector, grid: TimeGrid) -> list[StateVector]:
    """Full-spectrum propagation; the small-L oracle for everything else."""
    if psi0.n_qubits != ham.L:
        raise DimensionError("state size does not match Hamiltonian")
    psi0.check_normalized()
    prop = EigenPropagator.build(ham)
    return [prop.at(psi0, t) for t in grid.points]


def _diagonal_phases(model: ModelSpec, tau: float) -> np.ndarray:
    """exp(-i tau H_diag) with H_diag the fused ZZ + tilt diagonal."""
    ham = build_hamiltonian(model)
    return np.exp(-1j * tau * ham.diagonal)


def strang_step(
    state: StateVector,
    spec: StrangStepSpec,
    model: ModelSpec,
    _phases: Optional[np.ndarray] = None,
) -> StateVector:
    """U_diag(dt/2) U_X(dt) U_diag(dt/2) applied once.

    The ZZ evolution and the per-site tilt phases phi_i/2 commute, so both
    halves fuse into a single diagonal phase array of cost O(2^L); the X block
    is a product of identical single-site rotations by theta.
    """
    L = state.n_qubits
    if L != model.L:
        raise DimensionError("state size does not match model")
    phases = _diagonal_phases(model, spec.dt / 2.0) if _phases is None else _phases
    amps = phases * state.amplitudes
    if spec.theta != 0.0:
        rx = rotation_x(spec.theta)
        block = amps.reshape((2,) * L)
        # same 2x2 on every site: contract axis by axis
        for axis in range(L):
            block = np.tensordot(rx, block, axes=([1], [axis]))
            block = np.moveaxis(block, 0, axis)
        amps = block.reshape(-1)
    return StateVector(L, phases * amps)


def digital_evolve(
    psi0: StateVector,
    spec: StrangStepSpec,
    model: ModelSpec,
    emit_at: Optional[Iterable[int]] = None,
) -> list[StateVector]:
    """k-fold Strang composition; returns states at the requested step counts.

    `emit_at` defaults to every k in 0..n_steps.
    """
    psi0.check_normalized()
    ks = sorted(set(range(spec.n_steps + 1) if emit_at is None else (int(k) for k in emit_at)))
    if ks and ks[0] < 0:
        raise ConfigError("step counts must be nonnegative")
    phases = _diagonal_phases(model, spec.dt / 2.0)
    out = []
    state = psi0
    step = 0
    for k in ks:
        while step < k:
            state = strang_step(state, spec, model, _phases=phases)
            step += 1
        out.append(state)
    return out


def last_decade_indices(grid: TimeGrid) -> np.ndarray:
    """Indices of grid points inside the final decade [t_max/10, t_max]."""
    t_max = grid.points[-1]
    return np.nonzero(grid.points >= t_max / 10.0)[0]
