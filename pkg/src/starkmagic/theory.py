"""Strong-tilt effective theory: SW diagonalization, coupling profiles, front, closure.

In the strong-tilt regime the transverse field is rotated away order by order
with an anti-Hermitian generator.  With the ladder Hamiltonian split

    H0 = sum_j (F j Z_j + J Z_j Z_{j+1}),   V = h sum_j X_j,

(sites 1-based here, j = 1..L, so every site carries a nonzero tilt; the
offset against the 0-based dynamics modules only shifts a global constant)
the first-order generator solving [H0, S1] = V is

    S1 = sum_j (i h / 2) Delta_j^{-1} Y_j,
    Delta_j = F j + J (Z_{j-1} + Z_{j+1}),

with missing neighbors dropped at the chain ends.  Exact conjugation
H_eff = e^S H e^{-S} at small L exposes all diagonal multi-spin couplings;
the subset-mask expansion c_S = 2^{-L} Tr(H_eff^diag Z_S) is one
Walsh-Hadamard transform of the diagonal.

Distance-r couplings average to the factorially suppressed profile
J0 (h/F)^{r-1} / (r-1)!, the dephasing front solves t J_eff(r) = 1 in closed
form through the Lambert W0 branch, and the magic trace closes as
M_sat tanh(gamma r(t)).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import (
    ContractError,
    ConvergenceError,
    DomainError,
    ResonanceError,
    ResourceError,
)
from .hamiltonian import ChainSpec
from .magic import fwht_inplace

SW_MAX_QUBITS = 10
RESONANCE_TOL = 1e-8


@dataclass(frozen=True)
class LadderSpec:
    """Parameters on the 1-based ladder; unlike ChainSpec this allows L = 1."""

    L: int
    J: float
    h: float
    F: float

    def __post_init__(self):
        if self.L < 1:
            raise DomainError("need L >= 1")

    @classmethod
    def from_chain(cls, spec: ChainSpec) -> "LadderSpec":
        return cls(spec.L, spec.J, spec.h, spec.F)


def _as_ladder(spec) -> LadderSpec:
    if isinstance(spec, LadderSpec):
        return spec
    return LadderSpec(spec.L, spec.J, spec.h, spec.F)


def _site_z(L: int) -> np.ndarray:
    """(L, 2^L) z-eigenvalues with 1-based site j stored at row j-1 (bit j-1)."""
    idx = np.arange(1 << L, dtype=np.int64)
    bits = (idx[None, :] >> np.arange(L)[:, None]) & 1
    return 1.0 - 2.0 * bits


def _ladder_diagonals(spec: LadderSpec) -> tuple[np.ndarray, np.ndarray]:
    """(H0 diagonal, Delta_j table of shape (L, 2^L)) on the 1-based ladder."""
    L = spec.L
    z = _site_z(L)
    ladder = np.arange(1, L + 1, dtype=float)
    h0 = ladder @ z * spec.F
    for j in range(L - 1):
        h0 += spec.J * z[j] * z[j + 1]
    delta = spec.F * ladder[:, None] * np.ones((L, 1 << L))
    for j in range(L):
        if j - 1 >= 0:
            delta[j] += spec.J * z[j - 1]
        if j + 1 < L:
            delta[j] += spec.J * z[j + 1]
    return h0, delta


@dataclass
class SWResult:
    """First-order generator data and the exactly conjugated diagonal."""

    order: int
    spec: LadderSpec
    generator: np.ndarray  # dense anti-Hermitian S1
    sector_coefficients: dict  # (site j, z_left, z_right) -> h / (2 Delta)
    effective_diagonal: np.ndarray  # diag of e^S H e^-S
    analytic_diagonal: np.ndarray  # H0 + (h^2/2) Delta^-1 Z second-order form
    h0_diagonal: np.ndarray


@dataclass
class DiagonalCouplings:
    """Subset-mask expansion of an effective diagonal: sum_S c_S Z_S."""

    L: int
    c: np.ndarray  # (2^L,) coefficient for each site-subset mask

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.shape != (1 << self.L,):
            raise ContractError("need one coefficient per subset mask")

    @classmethod
    def from_diagonal(cls, diagonal: np.ndarray) -> "DiagonalCouplings":
        diagonal = np.asarray(diagonal, dtype=float)
        L = int(np.log2(diagonal.size))
        # Z_S value on |s> is (-1)^{popcount(S & s)}: one WHT then 2^-L
        c = fwht_inplace(diagonal.copy().astype(float)) / diagonal.size
        return cls(L, c)

    def reconstruct_diagonal(self) -> np.ndarray:
        return fwht_inplace(self.c.copy())

    def nonzero(self, tol: float = 1e-12) -> dict[int, float]:
        return {int(m): float(v) for m, v in enumerate(self.c) if abs(v) > tol}

    def two_body(self) -> np.ndarray:
        """J~_ij = c_{i,j} as a symmetric (L, L) matrix (1-based sites at 0-based rows)."""
        out = np.zeros((self.L, self.L))
        for i in range(self.L):
            for j in range(i + 1, self.L):
                out[i, j] = out[j, i] = self.c[(1 << i) | (1 << j)]
        return out

    def j_eff_profile(self) -> np.ndarray:
        return j_eff_profile(self)


def j_eff_profile(couplings: DiagonalCouplings) -> np.ndarray:
    """RMS distance-r couplings: J_eff(r) = sqrt(mean_i J~_{i,i+r}^2), r = 1..L-1."""
    two = couplings.two_body()
    L = couplings.L
    out = np.zeros(L - 1)
    for r in range(1, L):
        vals = np.array([two[i, i + r] for i in range(L - r)])
        out[r - 1] = float(np.sqrt(np.mean(vals**2)))
    return out


def sw_effective_diagonal(spec) -> tuple[SWResult, DiagonalCouplings]:
    """Exact e^S conjugation at small L plus the analytic second-order diagonal.

    Accepts a ChainSpec or a LadderSpec (the latter allows L = 1).  Raises
    ResonanceError when any sector detuning |Delta_j| falls below 1e-8 F
    (the expansion assumes F >> J, h and is not regularized).
    """
    spec = _as_ladder(spec)
    L = spec.L
    if L > SW_MAX_QUBITS:
        raise ResourceError(f"dense SW construction capped at L={SW_MAX_QUBITS}")
    if spec.F <= 0:
        raise DomainError("SW expansion needs F > 0")
    dim = 1 << L
    h0, delta = _ladder_diagonals(spec)
    z = _site_z(L)

    sectors: dict = {}
    for j in range(L):
        zl = z[j - 1] if j - 1 >= 0 else np.zeros(dim)
        zr = z[j + 1] if j + 1 < L else np.zeros(dim)
        for s in range(dim):
            key = (j + 1, int(zl[s]), int(zr[s]))
            if key not in sectors:
                d = delta[j, s]
                if abs(d) < RESONANCE_TOL * spec.F:
                    raise ResonanceError(
                        f"resonant sector at site j={j + 1}, neighbors "
                        f"(z_left={int(zl[s])}, z_right={int(zr[s])}): |Delta|={abs(d):.3e}"
                    )
                sectors[key] = spec.h / (2.0 * d)

    # S1[s', s] = -(h/2) (-1)^{s_j} / Delta_j(s) for s' = s ^ 2^j  (real antisymmetric)
    S = np.zeros((dim, dim))
    idx = np.arange(dim)
    for j in range(L):
        signs = z[j]  # (-1)^{s_j}
        S[idx ^ (1 << j), idx] += -(spec.h / 2.0) * signs / delta[j]

    H = np.diag(h0)
    for j in range(L):
        H[idx, idx ^ (1 << j)] += spec.h
    expS = scipy.linalg.expm(S)
    h_eff = expS @ H @ expS.T  # e^{-S} = e^{S}^T for real antisymmetric S
    analytic = h0 + np.sum((spec.h**2 / 2.0) * z / delta, axis=0)

    result = SWResult(
        order=2,
        spec=spec,
        generator=S,
        sector_coefficients=sectors,
        effective_diagonal=np.diag(h_eff).copy(),
        analytic_diagonal=analytic,
        h0_diagonal=h0,
    )
    return result, DiagonalCouplings.from_diagonal(result.effective_diagonal)


def j_eff_factorial(r: int, J0: float, h: float, F: float) -> float:
    """Factorially suppressed coupling scale J0 (h/F)^{r-1} / (r-1)!."""
    if r < 1:
        raise DomainError("distance must be r >= 1")
    if F <= 0:
        raise DomainError("need F > 0")
    return float(J0 * (h / F) ** (r - 1) / factorial(r - 1))


def lambert_w0(x: float, tol: float = 1e-14, max_iter: int = 80) -> float:
    """Principal branch W0(x), defined by W e^W = x, for x >= -1/e.

    Halley iteration from a piecewise initial guess: a branch-point series
    -1 + p - p^2/3 (p = sqrt(2(e x + 1))) below 0.3, w = x/(1+x) up to e,
    and log(x) - log(log(x)) beyond.
    """
    if np.isnan(x):
        raise DomainError("W0 of NaN")
    min_x = -np.exp(-1.0)
    if x < min_x - 1e-15:
        raise DomainError(f"W0 domain is x >= -1/e; got {x}")
    x = max(x, min_x)
    if x == 0.0:
        return 0.0
    if x < 0.3:
        p = np.sqrt(2.0 * (np.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0
    elif x < np.e:
        w = x / (1.0 + x)
    else:
        lx = np.log(x)
        w = lx - np.log(lx)
    for _ in range(max_iter):
        ew = np.exp(w)
        f = w * ew - x
        if w == -1.0:
            w = -1.0 + 1e-12
            continue
        denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0)
        step = f / denom
        w -= step
        if abs(step) <= tol * max(1.0, abs(w)):
            break
    else:
        raise ConvergenceError(f"Lambert W0 did not converge for x={x}", residual=abs(f))
    return float(w)


def dephasing_front(t, J0: float, h: float, F: float):
    """Front position r(t) = 1 + ln(tJ0) / W0(ln(tJ0) / (e h/F)).

    Returns (r, pre_front): before the microscopic time (t J0 <= 1) the front
    sits at r = 1 and the flag is set.  Scalar in, scalar out.
    """
    if J0 <= 0 or h <= 0 or F <= 0:
        raise DomainError("front needs positive J0, h, F")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    r = np.ones_like(t_arr)
    pre = t_arr * J0 <= 1.0
    ratio = h / F
    for i, ti in enumerate(t_arr):
        if pre[i]:
            continue
        x = np.log(ti * J0)
        r[i] = 1.0 + x / lambert_w0(x / (np.e * ratio))
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(r[0]), bool(pre[0])
    return r, pre


def front_from_root(t: float, J0: float, h: float, F: float, r_max: float = 400.0) -> float:
    """Front via direct root-finding of t * J_eff(r) = 1 on the factorial profile.

    Independent check of the closed form (Gamma-function continuation in r).
    """
    from scipy.special import gammaln

    if t * J0 <= 1.0:
        return 1.0

    def log_tj(r):
        return np.log(t * J0) + (r - 1.0) * np.log(h / F) - gammaln(r)

    lo, hi = 1.0, 2.0
    while log_tj(hi) > 0.0:
        hi *= 2.0
        if hi > r_max:
            raise ConvergenceError("front root exceeds r_max")
    return float(scipy.optimize.brentq(log_tj, lo, hi, xtol=1e-12))


@dataclass(frozen=True)
class ClosureModel:
    """Saturating growth closure M2(t) = M_sat tanh(gamma r(t))."""

    J0: float
    hF_ratio: float
    M_sat: float
    gamma: float

    def __post_init__(self):
        if self.J0 <= 0 or self.hF_ratio <= 0:
            raise DomainError("closure needs J0 > 0 and h/F > 0")
        if self.M_sat < 0 or self.gamma < 0:
            raise DomainError("closure needs M_sat >= 0 and gamma >= 0")


def closure_eval(t, model: ClosureModel):
    """M_sat tanh(gamma r(t)); bounded by M_sat, continuous through the front."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    r, _ = dephasing_front(t_arr, model.J0, 1.0, 1.0 / model.hF_ratio)
    out = model.M_sat * np.tanh(model.gamma * np.asarray(r))
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out[0])
    return out


@dataclass
class ClosureFit:
    """Fit outcome: model + diagnostics."""

    model: ClosureModel
    residual_rms: float
    covariance: Optional[np.ndarray]
    converged: bool
    degenerate: bool = False


def fit_closure(
    times: np.ndarray,
    m2: np.ndarray,
    h: float,
    F: float,
    m_sat_fixed: Optional[float] = None,
) -> ClosureFit:
    """Least-squares (M_sat, gamma, J0) against an M2(t) trace; J0 starts at h.

    Requires the trace to cover at least two decades past t J0 = 1 (with the
    initializer J0 = h).  Flat traces short-circuit to a degenerate flagged
    fit; `m_sat_fixed` pins the plateau instead of fitting it.
    """
    times = np.asarray(times, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    keep = ~np.isnan(m2)
    times, m2 = times[keep], m2[keep]
    if times.size < 4:
        raise DomainError("need at least 4 trace points")
    past = times[times * h > 1.0]
    if past.size < 2 or past[-1] / past[0] < 100.0:
        raise DomainError("trace must cover >= 2 decades past t*J0 = 1 (J0 ~ h)")

    peak = float(np.nanmax(np.abs(m2)))
    if peak < 1e-6:
        model = ClosureModel(J0=h, hF_ratio=h / F, M_sat=0.0, gamma=0.0)
        return ClosureFit(model, residual_rms=float(np.sqrt(np.mean(m2**2))),
                          covariance=None, converged=True, degenerate=True)

    late = float(np.mean(m2[times >= times[-1] / 10.0]))
    ratio = h / F

    def predict(params):
        if m_sat_fixed is None:
            m_sat, gamma, j0 = params
        else:
            gamma, j0 = params
            m_sat = m_sat_fixed
        r, _ = dephasing_front(times, j0, 1.0, 1.0 / ratio)
        return m_sat * np.tanh(gamma * np.asarray(r))

    def residuals(params):
        return predict(params) - m2

    # the pre-front kink leaves shallow local minima: multi-start over (gamma, J0)
    m_sat_starts = [max(late, 0.1 * peak)] if m_sat_fixed is None else [None]
    starts = []
    for ms in m_sat_starts:
        for g0 in (0.3, 1.0, 3.0):
            for j0 in (0.5 * h, h, 2.0 * h):
                starts.append(([ms, g0, j0] if ms is not None else [g0, j0]))
    if m_sat_fixed is None:
        lower = np.array([0.0, 0.0, 1e-6 * h])
        upper = np.array([np.inf, np.inf, np.inf])
    else:
        lower = np.array([0.0, 1e-6 * h])
        upper = np.array([np.inf, np.inf])
    sol = None
    for x0 in starts:
        cand = scipy.optimize.least_squares(
            residuals, np.asarray(x0, dtype=float), bounds=(lower, upper), xtol=1e-12
        )
        if cand.success and (sol is None or cand.cost < sol.cost):
            sol = cand
    if sol is None:
        raise ConvergenceError("closure fit did not converge")
    if m_sat_fixed is None:
        m_sat, gamma, j0 = (float(v) for v in sol.x)
    else:
        gamma, j0 = (float(v) for v in sol.x)
        m_sat = float(m_sat_fixed)
    dof = max(1, times.size - sol.x.size)
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    jac = sol.jac
    try:
        cov = np.linalg.inv(jac.T @ jac) * (np.sum(sol.fun**2) / dof)
    except np.linalg.LinAlgError:
        cov = None
    model = ClosureModel(J0=max(j0, 1e-12), hF_ratio=ratio, M_sat=m_sat, gamma=gamma)
    return ClosureFit(model, residual_rms=rms, covariance=cov, converged=True)
