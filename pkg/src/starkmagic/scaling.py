"""Parameter sweeps, saturation extraction, crossover curves, and data collapse.

A sweep runs one quench per (F, L, initial-state sample), persists each point
to its own CSV (append-only, resumable by run id + point id), and reduces the
long-time window to saturation records.  Crossover curves and the finite-size
collapse of (F - F_c) L^{1/nu} operate on those records only.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.optimize
import scipy.stats

from .errors import ConfigError, ConvergenceError, DomainError
from .evolution import TimeGrid, last_decade_indices
from .hamiltonian import ChainSpec, InitialStateSpec, build_hamiltonian, prepare_initial_state
from .magic import QuenchTrace, haar_reference, quench_trace
from .theory import fit_closure

FLOAT_FMT = "{:.12g}"


@dataclass(frozen=True)
class SweepSpec:
    """Axes and budgets for one sweep; L values must be even when half cuts are used."""

    f_values: tuple[float, ...]
    l_values: tuple[int, ...]
    initial_kinds: tuple[str, ...]
    grid: TimeGrid
    J: float = 1.0
    h: float = 1.0
    n_samples: int = 1
    seed: int = 0
    saturation: str = "auto"  # "fit" | "window" | "auto"
    m2_window_only: bool = False
    propagator: str = "auto"

    def __post_init__(self):
        if not self.f_values or not self.l_values or not self.initial_kinds:
            raise ConfigError("sweep axes must be nonempty")
        if any(L % 2 for L in self.l_values):
            raise ConfigError("half-chain cuts need even L")
        if self.saturation not in ("fit", "window", "auto"):
            raise ConfigError("saturation mode must be fit, window, or auto")

    def points(self):
        for L in self.l_values:
            for f in self.f_values:
                for kind in self.initial_kinds:
                    yield (L, f, kind)


@dataclass
class SaturationRecord:
    """Long-time summary of one sweep point."""

    L: int
    F: float
    initial_kind: str
    m2_sat: float
    m2_err: float
    s_half: float  # long-time entanglement average (order chosen by caller)
    s_half_err: float
    window: tuple[float, float]
    method: str  # "fit" or "window"

    @property
    def delta_m2(self) -> float:
        return haar_reference(self.L) - self.m2_sat


def point_id(L: int, F: float, kind: str, sample: int = -1) -> str:
    """Stable identifier for one sweep point; feeds both filenames and rng streams."""
    label = f"L={L}|F={FLOAT_FMT.format(F)}|init={kind}" + ("" if sample < 0 else f"|s={sample}")
    return label


def point_stream(master_seed: int, label: str) -> int:
    """Stable 63-bit rng stream id from a point label (adding points never shifts others)."""
    digest = hashlib.sha256(f"{master_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _saturation_from_trace(
    trace: QuenchTrace,
    h: float,
    F: float,
    mode: str,
    entropy_order: int = 1,
) -> SaturationRecord:
    times = trace.times
    idx = last_decade_indices_from(times)
    window = (float(times[idx[0]]), float(times[-1]))
    m2_mean = trace.mean_m2()
    s_series = trace.mean_s1() if entropy_order == 1 else trace.mean_s2()

    def window_stats(series):
        vals = series[idx]
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            raise DomainError("no diagnostics inside the saturation window")
        err = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        return float(np.mean(vals)), err

    m2_win, m2_win_err = window_stats(m2_mean)
    s_win, s_win_err = window_stats(s_series)

    method = "window"
    m2_sat, m2_err = m2_win, m2_win_err
    if mode in ("fit", "auto"):
        try:
            fit = fit_closure(times, m2_mean, h=h, F=F)
            rel_ok = True
            if fit.covariance is not None and fit.model.M_sat > 0:
                rel = np.sqrt(abs(fit.covariance[0, 0])) / fit.model.M_sat
                rel_ok = rel <= 0.5
            if fit.converged and not fit.degenerate and rel_ok:
                m2_sat, m2_err, method = fit.model.M_sat, m2_win_err, "fit"
            elif mode == "fit":
                method = "window"  # documented fallback
        except (DomainError, ConvergenceError):
            pass  # fall back to the window average
    meta = trace.meta
    return SaturationRecord(
        L=int(meta.get("L", 0)),
        F=float(F),
        initial_kind=str(meta.get("initial_kind", "")),
        m2_sat=m2_sat,
        m2_err=m2_err,
        s_half=s_win,
        s_half_err=s_win_err,
        window=window,
        method=method,
    )


def last_decade_indices_from(times: np.ndarray) -> np.ndarray:
    t_max = times[-1]
    return np.nonzero(times >= t_max / 10.0)[0]


def run_point(
    spec: SweepSpec,
    L: int,
    F: float,
    kind: str,
    entropy_order: int = 1,
) -> tuple[QuenchTrace, SaturationRecord]:
    """Simulate one sweep point (all samples of the initial-state family)."""
    model = ChainSpec(L=L, J=spec.J, h=spec.h, F=F)
    ham = build_hamiltonian(model)
    label = point_id(L, F, kind)
    init = InitialStateSpec(
        kind, n_samples=spec.n_samples if kind == "random_bloch" else 1,
        seed=point_stream(spec.seed, label),
    )
    states = prepare_initial_state(init, L, model=model)
    m2_idx = last_decade_indices(spec.grid) if spec.m2_window_only else None
    trace = quench_trace(
        ham,
        states,
        spec.grid,
        propagator=spec.propagator,
        m2_indices=m2_idx,
        meta={"L": L, "F": F, "initial_kind": kind, "seed": init.seed, "J": spec.J, "h": spec.h},
    )
    mode = spec.saturation
    if mode == "auto":
        mode = "window" if spec.m2_window_only else "fit"
    record = _saturation_from_trace(trace, spec.h, F, mode, entropy_order=entropy_order)
    return trace, record


def run_sweep(
    spec: SweepSpec,
    out_dir: Optional[Path] = None,
    run_id: str = "",
    entropy_order: int = 1,
    progress: Optional[Callable[[str], None]] = None,
    executor=None,
) -> tuple[list[QuenchTrace], list[SaturationRecord]]:
    """All sweep points, optionally persisted per point and resumable.

    With `out_dir`, each finished point writes `points/<id>.csv` plus a record
    line; rerunning skips points whose files exist (idempotent by run id and
    point id).  `executor` may be a concurrent.futures executor; results merge
    in deterministic point order either way.
    """
    from .reporting import read_point_csv, write_point_csv  # local import: io helpers

    points = list(spec.points())
    traces: dict[tuple, QuenchTrace] = {}
    records: dict[tuple, SaturationRecord] = {}

    def work(pt):
        L, F, kind = pt
        if out_dir is not None:
            path = Path(out_dir) / "points" / (sanitize(point_id(L, F, kind, -1)) + ".csv")
            if path.exists():
                trace, record = read_point_csv(path)
                return pt, trace, record, False
        trace, record = run_point(spec, L, F, kind, entropy_order=entropy_order)
        return pt, trace, record, True

    if executor is None:
        results = [work(pt) for pt in points]
    else:
        results = list(executor.map(work, points))

    for pt, trace, record, fresh in results:
        traces[pt] = trace
        records[pt] = record
        if fresh and out_dir is not None:
            path = Path(out_dir) / "points" / (sanitize(point_id(*pt, -1)) + ".csv")
            write_point_csv(path, trace, record, run_id)
        if progress is not None:
            progress(point_id(*pt))
    ordered = [(traces[pt], records[pt]) for pt in points]
    return [t for t, _ in ordered], [r for _, r in ordered]


def sanitize(label: str) -> str:
    return label.replace("|", "_").replace("=", "-").replace(".", "p")


# ---------------------------------------------------------------------------
# crossover curves and collapse
# ---------------------------------------------------------------------------


@dataclass
class CrossoverCurves:
    """Per-size curves of a long-time observable versus F."""

    observable: str
    sizes: tuple[int, ...]
    f_values: dict[int, np.ndarray]
    values: dict[int, np.ndarray]
    errors: dict[int, np.ndarray]
    spearman: dict[int, float]


def crossover_curves(records: Sequence[SaturationRecord]) -> dict[str, CrossoverCurves]:
    """Tables of delta-M2(F; L) and S_half(F; L) with monotonicity diagnostics."""
    sizes = sorted(set(r.L for r in records))
    f_all = sorted(set(r.F for r in records))
    if len(sizes) < 2 or len(f_all) < 5:
        raise DomainError("crossover needs >= 2 sizes and >= 5 F points")
    out = {}
    for name, getter in (
        ("delta_m2", lambda r: (r.delta_m2, r.m2_err)),
        ("s_half", lambda r: (r.s_half, r.s_half_err)),
    ):
        fv, vv, ee, rho = {}, {}, {}, {}
        for L in sizes:
            rows = sorted((r for r in records if r.L == L), key=lambda r: r.F)
            fv[L] = np.array([r.F for r in rows])
            pairs = [getter(r) for r in rows]
            vv[L] = np.array([p[0] for p in pairs])
            ee[L] = np.array([p[1] for p in pairs])
            rho[L] = float(scipy.stats.spearmanr(fv[L], vv[L]).statistic)
        out[name] = CrossoverCurves(name, tuple(sizes), fv, vv, ee, rho)
    return out


@dataclass
class CollapseFit:
    """Optimized crossover location and exponent with the collapse objective."""

    f_c: float
    nu: float
    cost: float
    cost_unscaled: float
    bootstrap: dict = field(default_factory=dict)


def collapse_cost(
    curves: CrossoverCurves, f_c: float, nu: float, n_grid: int = 64
) -> float:
    """Master-curve residual: rescale x = (F - F_c) L^{1/nu}, interpolate every
    size onto the overlap region, and take the variance-normalized mean squared
    deviation from the pointwise cross-size mean."""
    xs, ys = [], []
    for L in curves.sizes:
        xs.append((curves.f_values[L] - f_c) * L ** (1.0 / nu))
        ys.append(curves.values[L])
    lo = max(x.min() for x in xs)
    hi = min(x.max() for x in xs)
    if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        return np.inf
    grid = np.linspace(lo, hi, n_grid)
    interped = []
    for x, y in zip(xs, ys):
        order = np.argsort(x)
        interped.append(np.interp(grid, x[order], y[order]))
    stack = np.vstack(interped)
    mean = stack.mean(axis=0)
    var = float(np.var(stack))
    if var <= 0:
        return 0.0
    return float(np.mean((stack - mean) ** 2) / var)


def fit_collapse(
    curves: CrossoverCurves,
    nu_range: tuple[float, float] = (0.2, 1.5),
    n_bootstrap: int = 200,
    rng=0,
) -> CollapseFit:
    """Derivative-free simplex over (F_c, nu) from a multi-start grid, with
    bootstrap-over-F-points uncertainties."""
    if len(curves.sizes) < 3:
        raise DomainError("collapse needs >= 3 sizes")
    f_lo = min(curves.f_values[L].min() for L in curves.sizes)
    f_hi = max(curves.f_values[L].max() for L in curves.sizes)
    _OUT_OF_BOUNDS = 1e300  # finite sentinel keeps Nelder-Mead arithmetic clean

    def objective(p, cv=curves):
        f_c, nu = p
        # F_c constrained to the swept range (CollapseFit invariant)
        if not (f_lo <= f_c <= f_hi) or not (nu_range[0] <= nu <= nu_range[1]):
            return _OUT_OF_BOUNDS
        cost = collapse_cost(cv, f_c, nu)
        return cost if np.isfinite(cost) else _OUT_OF_BOUNDS

    def optimize(cv):
        best = None
        starts = [
            (fc, nu)
            for fc in np.linspace(f_lo, f_lo + 0.6 * (f_hi - f_lo), 5)
            for nu in np.linspace(nu_range[0] + 0.05, nu_range[1] - 0.05, 5)
        ]
        for x0 in starts:
            sol = scipy.optimize.minimize(
                objective, x0, args=(cv,), method="Nelder-Mead",
                options={"xatol": 1e-5, "fatol": 1e-10, "maxiter": 400},
            )
            if best is None or sol.fun < best.fun:
                best = sol
        return best

    best = optimize(curves)
    if best is None or best.fun >= _OUT_OF_BOUNDS:
        raise ConvergenceError("no collapse: rescaled curves never overlap")
    f_c, nu = float(best.x[0]), float(best.x[1])

    # plain-F baseline: no rescaling of the abscissa
    baseline = CrossoverCurves(
        curves.observable,
        curves.sizes,
        curves.f_values,
        curves.values,
        curves.errors,
        curves.spearman,
    )
    cost_unscaled = collapse_cost(baseline, 0.0, np.inf)

    gen = np.random.default_rng(rng if isinstance(rng, int) else None)
    boots = []
    for _ in range(n_bootstrap):
        resampled_fv, resampled_vv = {}, {}
        ok = True
        for L in curves.sizes:
            n = curves.f_values[L].size
            pick = np.sort(gen.integers(0, n, size=n))
            f_r = curves.f_values[L][pick]
            if np.unique(f_r).size < 3:
                ok = False
                break
            resampled_fv[L] = f_r
            resampled_vv[L] = curves.values[L][pick]
        if not ok:
            continue
        cv = CrossoverCurves(
            curves.observable, curves.sizes, resampled_fv, resampled_vv,
            curves.errors, curves.spearman,
        )
        sol = scipy.optimize.minimize(
            objective, [f_c, nu], args=(cv,), method="Nelder-Mead",
            options={"xatol": 1e-4, "fatol": 1e-9, "maxiter": 200},
        )
        if sol.fun < _OUT_OF_BOUNDS:
            boots.append(sol.x)
    boot_stats = {}
    if boots:
        arr = np.array(boots)
        boot_stats = {
            "f_c_std": float(np.std(arr[:, 0], ddof=1)) if len(arr) > 1 else 0.0,
            "nu_std": float(np.std(arr[:, 1], ddof=1)) if len(arr) > 1 else 0.0,
            "n_resamples": int(len(arr)),
        }
    return CollapseFit(f_c=f_c, nu=nu, cost=float(best.fun),
                       cost_unscaled=float(cost_unscaled), bootstrap=boot_stats)


# ---------------------------------------------------------------------------
# parametric magic-entanglement relation
# ---------------------------------------------------------------------------


def gaussian_smooth_logtime(times: np.ndarray, series: np.ndarray, sigma_decades: float) -> np.ndarray:
    """Gaussian kernel average over log10(t); sigma <= 0 returns the input."""
    if sigma_decades <= 0:
        return np.asarray(series, dtype=float).copy()
    logt = np.log10(times)
    w = np.exp(-0.5 * ((logt[:, None] - logt[None, :]) / sigma_decades) ** 2)
    y = np.asarray(series, dtype=float)
    valid = ~np.isnan(y)
    w = w * valid[None, :]
    norm = w.sum(axis=1)
    out = np.where(norm > 0, (w @ np.nan_to_num(y)) / np.where(norm > 0, norm, 1.0), np.nan)
    return out


@dataclass
class ParametricRelation:
    """Smoothed (S_half, M2) pairs per F, optionally plateau-rescaled."""

    f_values: tuple[float, ...]
    s_half: dict[float, np.ndarray]
    m2: dict[float, np.ndarray]
    times: np.ndarray
    f_factors: dict[float, float]
    rescaled: bool


def parametric_relation(
    traces: Sequence[QuenchTrace],
    sigma_decades: float = 0.1,
    rescale: bool = False,
    entropy_order: int = 1,
) -> ParametricRelation:
    """Build the (S_half, M2) trajectories from a family of traces on one grid.

    With `rescale`, each F's M2 is divided by f(F) = plateau(F)/plateau(F_ref),
    F_ref the smallest F present (so f(F_ref) = 1 by construction).
    """
    if not traces:
        raise DomainError("need at least one trace")
    times = traces[0].times
    for tr in traces[1:]:
        if tr.times.shape != times.shape or not np.allclose(tr.times, times):
            raise DomainError("parametric relation needs a shared time grid")
    by_f: dict[float, QuenchTrace] = {}
    for tr in traces:
        by_f[float(tr.meta.get("F", np.nan))] = tr
    fs = sorted(by_f)
    idx = last_decade_indices_from(times)

    plateaus = {}
    for f in fs:
        m2 = by_f[f].mean_m2()
        vals = m2[idx]
        plateaus[f] = float(np.nanmean(vals))
    f_ref = fs[0]
    factors = {f: (plateaus[f] / plateaus[f_ref] if rescale else 1.0) for f in fs}

    s_out, m_out = {}, {}
    for f in fs:
        tr = by_f[f]
        s_series = tr.mean_s1() if entropy_order == 1 else tr.mean_s2()
        s_out[f] = gaussian_smooth_logtime(times, s_series, sigma_decades)
        m_out[f] = gaussian_smooth_logtime(times, tr.mean_m2(), sigma_decades) / factors[f]
    return ParametricRelation(
        f_values=tuple(fs), s_half=s_out, m2=m_out, times=times.copy(),
        f_factors={f: float(factors[f]) for f in fs}, rescaled=rescale,
    )
