"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s`.  Tolerances are pinned here
and never loosened at runtime; criterion 7's front-vs-root bound is asserted
exactly as stated (see notes in the repo README on its h/F = 0.2 edge).
"""

import hashlib
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import scipy.linalg

from starkmagic.evolution import (
    KrylovConfig,
    StrangStepSpec,
    TimeGrid,
    digital_evolve,
    eigen_evolve,
    exact_evolve,
    last_decade_indices,
)
from starkmagic.hamiltonian import (
    ChainSpec,
    InitialStateSpec,
    build_hamiltonian,
    prepare_initial_state,
)
from starkmagic.magic import haar_reference, pauli_moment_transform, quench_trace, sre
from starkmagic.scaling import (
    SaturationRecord,
    crossover_curves,
    fit_collapse,
    gaussian_smooth_logtime,
)
from starkmagic.shadows import (
    m2_estimator,
    purity_setting_values,
    sample_settings_and_shots,
    w_setting_values,
)
from starkmagic.states import (
    HADAMARD,
    PHASE_S,
    PauliString,
    SeededRng,
    StateVector,
    apply_cnot,
    apply_cz,
    apply_single_qubit_unitary,
    pauli_expectation,
    random_state,
    tensor_product,
)
from starkmagic.theory import (
    LadderSpec,
    dephasing_front,
    front_from_root,
    lambert_w0,
    sw_effective_diagonal,
)

from .test_magic import random_clifford_state


def report(criterion: int, ok: bool, detail: str) -> bool:
    flag = "PASS" if ok else "FAIL"
    print(f"\n[ACCEPTANCE] criterion {criterion:>2}: {flag}  {detail}")
    return ok


def test_criterion_01_stabilizer_nullity():
    # M2 = 0 within 1e-10 for 100 random Clifford-circuit states, L <= 10
    start = time.time()
    gen = np.random.default_rng(101)
    worst = 0.0
    for k in range(100):
        L = int(gen.integers(2, 11))
        psi = random_clifford_state(L, gen, depth=2 * L)
        worst = max(worst, abs(sre(psi).m_alpha))
    elapsed = time.time() - start
    ok = worst <= 1e-10 and elapsed < 60
    assert report(1, ok, f"max |M2| = {worst:.2e} over 100 Clifford states ({elapsed:.0f}s)")


def test_criterion_02_clifford_invariance_and_additivity():
    gen = np.random.default_rng(202)
    worst_inv = 0.0
    for L in (4, 6, 8):
        psi = random_state(L, SeededRng(200 + L))
        base = sre(psi).m_alpha
        rotated = psi
        for _ in range(3 * L):
            site = int(gen.integers(0, L))
            gate = [HADAMARD, PHASE_S][int(gen.integers(0, 2))]
            rotated = apply_single_qubit_unitary(rotated, site, gate)
            a, b = gen.choice(L, size=2, replace=False)
            rotated = (
                apply_cz(rotated, int(a), int(b))
                if gen.integers(0, 2)
                else apply_cnot(rotated, int(a), int(b))
            )
        worst_inv = max(worst_inv, abs(sre(rotated).m_alpha - base))
    worst_add = 0.0
    for seed in range(5):
        g2 = np.random.default_rng(seed)
        la, lb = int(g2.integers(1, 5)), int(g2.integers(1, 5))
        a = random_state(la, SeededRng(300 + seed))
        b = random_state(lb, SeededRng(400 + seed))
        combined = sre(tensor_product(a, b)).m_alpha
        worst_add = max(worst_add, abs(combined - sre(a).m_alpha - sre(b).m_alpha))
    ok = worst_inv <= 1e-9 and worst_add <= 1e-9
    assert report(2, ok, f"Clifford invariance {worst_inv:.2e}, additivity {worst_add:.2e}")


def test_criterion_03_haar_benchmark():
    vals = [sre(random_state(8, SeededRng(3000 + k))).m_alpha for k in range(50)]
    mean = float(np.mean(vals))
    ref = haar_reference(8)
    ok = abs(mean - ref) <= 0.02 * ref
    assert report(3, ok, f"mean M2 = {mean:.4f} vs log2(259)-2 = {ref:.4f} (50 Haar states, L=8)")


def test_criterion_04_transform_vs_bruteforce():
    worst = 0.0
    for L in (1, 2, 3, 4, 5):
        psi = random_state(L, SeededRng(4000 + L))
        table = pauli_moment_transform(psi)
        for a in range(1 << L):
            for b in range(1 << L):
                exp = pauli_expectation(psi, PauliString(a, b))
                worst = max(worst, abs(table.moments[a, b] - exp * exp))
    ok = worst <= 1e-10
    assert report(4, ok, f"fast transform vs 4^L enumeration, max dev = {worst:.2e} (L <= 5)")


def test_criterion_05_propagator_suite():
    worst_fid = 1.0
    for L in (4, 6):
        ham = build_hamiltonian(ChainSpec(L=L, J=1.0, h=1.0, F=0.4))
        psi0 = prepare_initial_state(InitialStateSpec("x_polarized"), L)[0]
        grid = TimeGrid.logarithmic(0.5, 50.0, 8)
        for a, b in zip(exact_evolve(ham, psi0, grid, KrylovConfig()), eigen_evolve(ham, psi0, grid)):
            worst_fid = min(worst_fid, a.fidelity(b))
    model = ChainSpec(L=3, J=1.0, h=1.0, F=0.5)
    ham = build_hamiltonian(model)
    psi0 = prepare_initial_state(InitialStateSpec("x_polarized"), 3)[0]
    (exact,) = eigen_evolve(ham, psi0, TimeGrid(np.array([2.0])))
    dts = np.array([0.1, 0.05, 0.025, 0.0125])
    errs = []
    for dt in dts:
        n = int(round(2.0 / dt))
        (st,) = digital_evolve(psi0, StrangStepSpec.from_model(model, dt, n), model, emit_at=[n])
        errs.append(st.phase_distance(exact))
    slope = float(np.polyfit(np.log(dts), np.log(errs), 1)[0])
    ok = worst_fid >= 1 - 1e-9 and abs(slope - 2.0) <= 0.2
    assert report(
        5, ok, f"Krylov-eigen fidelity >= {worst_fid:.12f}, Strang global slope {slope:.3f}"
    )


def test_criterion_06_estimator_unbiasedness():
    start = time.time()
    L = 3
    psi = random_state(L, SeededRng(600))
    table = pauli_moment_transform(psi)
    w_exact = float(np.sum(table.moments**2)) / (1 << (2 * L))
    from starkmagic.magic import reduced_spectrum

    p_exact = float(np.sum(reduced_spectrum(psi, [0]) ** 2))
    n_batches, n_u, n_m = 500, 24, 8
    w_means = np.empty(n_batches)
    p_means = np.empty(n_batches)
    for k in range(n_batches):
        batch = sample_settings_and_shots(psi, n_u, n_m, SeededRng(6000 + k), subsystem=[0])
        w_means[k] = w_setting_values(batch).mean()
        p_means[k] = purity_setting_values(batch, 0b001).mean()
    w_sem = w_means.std(ddof=1) / np.sqrt(n_batches)
    p_sem = p_means.std(ddof=1) / np.sqrt(n_batches)
    w_dev = abs(w_means.mean() - w_exact) / w_sem
    p_dev = abs(p_means.mean() - p_exact) / p_sem

    big = sample_settings_and_shots(psi, 4000, 16, SeededRng(601))
    m2_est = m2_estimator(big)
    m2_dev = abs(m2_est.value - sre(psi).m_alpha) / m2_est.stderr

    p1, p2 = random_state(2, SeededRng(602)), random_state(2, SeededRng(603))
    rho = 0.7 * np.outer(p1.amplitudes, p1.amplitudes.conj())
    rho += 0.3 * np.outer(p2.amplitudes, p2.amplitudes.conj())
    w_mix = sum(
        np.real(np.trace(PauliString(a, z).dense(2) @ rho)) ** 4
        for a in range(4) for z in range(4)
    ) / 16.0
    m2_mix_exact = -np.log2(4 * w_mix / float(np.real(np.trace(rho @ rho))))
    mix_batch = sample_settings_and_shots([(0.7, p1), (0.3, p2)], 4000, 16, SeededRng(604))
    mix_est = m2_estimator(mix_batch)
    mix_dev = abs(mix_est.value - m2_mix_exact) / mix_est.stderr

    elapsed = time.time() - start
    ok = w_dev <= 3 and p_dev <= 3 and m2_dev <= 3 and mix_dev <= 3 and elapsed < 600
    assert report(
        6,
        ok,
        f"|bias|/sem over 500 batches: W {w_dev:.2f}, purity {p_dev:.2f}; "
        f"M2 {m2_dev:.2f} sigma, mixed-case M2 {mix_dev:.2f} sigma ({elapsed:.0f}s)",
    )


def test_criterion_07_appendix_a_suite():
    # (a) spectrum preservation under e^S at L <= 8
    worst_spec = 0.0
    for L in (4, 6, 8):
        spec = LadderSpec(L, 1.0, 0.6, 7.0)
        sw, _ = sw_effective_diagonal(spec)
        expS = scipy.linalg.expm(sw.generator)
        dim = 1 << L
        idx = np.arange(dim)
        H = np.diag(sw.h0_diagonal).astype(float)
        for j in range(L):
            H[idx, idx ^ (1 << j)] += spec.h
        h_eff = expS @ H @ expS.T
        dev = np.max(np.abs(np.sort(np.linalg.eigvalsh(h_eff)) - np.sort(np.linalg.eigvalsh(H))))
        worst_spec = max(worst_spec, dev / max(1.0, np.max(np.abs(H))))
    # (b) L=1 energy expansion with O(h^4) residual slope
    F = 10.0
    hs = np.array([0.5, 0.25, 0.125, 0.0625])
    residuals = []
    for h in hs:
        sw, _ = sw_effective_diagonal(LadderSpec(1, 0.0, h, F))
        residuals.append(abs(sw.analytic_diagonal[0] - np.sqrt(F * F + h * h)))
    slope = float(np.polyfit(np.log(hs), np.log(residuals), 1)[0])
    # (c) Lambert identity
    worst_w = 0.0
    for x in (-1 / np.e, -0.2, 1e-6, 0.5, 1.0, np.e, 20.0, 1e8):
        w = lambert_w0(x)
        worst_w = max(worst_w, abs(w * np.exp(w) - x) / max(1.0, abs(x)))
    # (d) closed-form front vs exact-factorial root-finding
    front_rows = []
    for ratio in (0.05, 0.10, 0.15, 0.20):
        devs = []
        for tj in np.geomspace(np.e, 1e6, 13):
            rc, _ = dephasing_front(tj, 1.0, ratio, 1.0)
            devs.append(abs(rc - front_from_root(tj, 1.0, ratio, 1.0)))
        front_rows.append((ratio, max(devs)))
    worst_front = max(d for _, d in front_rows)
    ok = (
        worst_spec <= 1e-10
        and abs(slope - 4.0) <= 0.2
        and worst_w <= 1e-12
        and worst_front <= 0.5
    )
    front_txt = ", ".join(f"h/F={r}: {d:.3f}" for r, d in front_rows)
    assert report(
        7,
        ok,
        f"spectrum dev {worst_spec:.2e}; L=1 residual slope {slope:.3f}; "
        f"W0 identity {worst_w:.2e}; front |dr| [{front_txt}] vs bound 0.5",
    )


#: frozen settings for the qualitative trace criteria
_GRID8 = TimeGrid.logarithmic(0.05, 1000.0, 60)
_SMOOTH_DECADES = 0.25


def _half_haar_crossing(m2: np.ndarray, L: int) -> float:
    """Last time the smoothed trace crosses half the Haar benchmark from below."""
    t = _GRID8.points
    y = gaussian_smooth_logtime(t, m2, _SMOOTH_DECADES)
    threshold = 0.5 * haar_reference(L)
    below = np.nonzero(y < threshold)[0]
    if below.size == 0:
        return float(t[0])
    i = below[-1]
    if i == len(y) - 1:
        return float("inf")
    t1, t2, y1, y2 = t[i], t[i + 1], y[i], y[i + 1]
    return float(t1 * (t2 / t1) ** ((threshold - y1) / (y2 - y1)))


def test_criterion_08_fig1_qualitative():
    start = time.time()
    L = 10
    crossings = []
    for F in (0.5, 1.0, 2.0, 5.0):
        model = ChainSpec(L=L, J=1.0, h=1.0, F=F)
        ham = build_hamiltonian(model)
        psi0 = prepare_initial_state(InitialStateSpec("x_polarized"), L)[0]
        trace = quench_trace(ham, psi0, _GRID8)
        crossings.append(_half_haar_crossing(trace.mean_m2(), L))
    increasing = all(a < b for a, b in zip(crossings, crossings[1:]))

    model = ChainSpec(L=L, J=1.0, h=1.0, F=5.0)
    ham = build_hamiltonian(model)
    psi0 = prepare_initial_state(InitialStateSpec("z_star"), L, model=model)[0]
    trace = quench_trace(ham, psi0, _GRID8)
    m2_max = float(np.nanmax(trace.mean_m2()))
    cap = 0.25 * haar_reference(L)
    elapsed = time.time() - start
    ok = increasing and m2_max < cap and elapsed < 1800
    txt = ", ".join(f"{c:.3g}" for c in crossings)
    assert report(
        8,
        ok,
        f"t(M2 = Haar/2) along F=0.5,1,2,5: [{txt}] (strictly increasing: {increasing}); "
        f"z-star F=5 max M2 {m2_max:.3f} < {cap:.3f} ({elapsed:.0f}s)",
    )


def test_criterion_09_fig2g_qualitative():
    start = time.time()
    grid = TimeGrid.logarithmic(0.1, 1000.0, 48)
    idx = last_decade_indices(grid)
    slopes = {}
    for F in (0.2, 5.0):
        sats = []
        for L in (6, 8, 10):
            model = ChainSpec(L=L, J=1.0, h=1.0, F=F)
            ham = build_hamiltonian(model)
            psi0 = prepare_initial_state(InitialStateSpec("z_star"), L, model=model)[0]
            trace = quench_trace(ham, psi0, grid, m2_indices=idx)
            sats.append(float(np.nanmean(trace.mean_m2()[idx])))
        slopes[F] = float(np.polyfit([6, 8, 10], sats, 1)[0])
    elapsed = time.time() - start
    ok = slopes[0.2] > 0.5 and abs(slopes[5.0]) < 0.1 and elapsed < 3600
    assert report(
        9,
        ok,
        f"z-star saturation slope vs L: {slopes[0.2]:.3f} bits/site at F=0.2 (> 0.5), "
        f"{slopes[5.0]:+.3f} at F=5 (|.| < 0.1) ({elapsed:.0f}s)",
    )


#: criterion 10 sweep: random-Bloch ensemble (n = 6), non-resonant F grid
#: (staying clear of the Stark resonances F = 2J/k and of the integrable
#: F -> 0 point), window-averaged saturation per the spec fallback
_F_VALUES_10 = (0.1, 0.15, 0.22, 0.32, 0.45, 0.58, 0.9, 1.3, 1.8, 2.6)
_MASTER_SEED_10 = 20240811
#: collapse fitted inside the crossover scaling window only (the deepest-tilt
#: branch is factorially localized and outside the scaling ansatz); the
#: monotonicity diagnostics always use the full grid
_COLLAPSE_F_MAX = 1.8


def test_criterion_10_crossover_suite():
    from starkmagic.scaling import point_stream

    start = time.time()
    grid = TimeGrid.logarithmic(0.1, 1000.0, 48)
    idx = last_decade_indices(grid)
    records = []
    for L in (8, 10, 12):
        for F in _F_VALUES_10:
            model = ChainSpec(L=L, J=1.0, h=1.0, F=F)
            ham = build_hamiltonian(model)
            seed = point_stream(_MASTER_SEED_10, f"L={L}|F={F!r}|init=random_bloch")
            states = prepare_initial_state(
                InitialStateSpec("random_bloch", 6, seed=seed), L
            )
            trace = quench_trace(ham, states, grid, m2_indices=idx)
            records.append(
                SaturationRecord(
                    L=L, F=F, initial_kind="random_bloch",
                    m2_sat=float(np.nanmean(trace.mean_m2()[idx])), m2_err=0.02,
                    s_half=float(np.nanmean(trace.mean_s1()[idx])), s_half_err=0.02,
                    window=(100.0, 1000.0), method="window",
                )
            )
    curves = crossover_curves(records)
    rho_dm2 = min(curves["delta_m2"].spearman.values())
    rho_s = max(curves["s_half"].spearman.values())

    from .test_scaling import synthetic_curves

    synth = synthetic_curves(0.2, 0.5, noise=0.01, seed=1010)
    synth_fit = fit_collapse(synth, n_bootstrap=0)
    synth_ok = abs(synth_fit.f_c - 0.2) <= 0.02 and abs(synth_fit.nu - 0.5) <= 0.05

    window_records = [r for r in records if r.F <= _COLLAPSE_F_MAX]
    fit = fit_collapse(crossover_curves(window_records)["delta_m2"], n_bootstrap=50, rng=10)
    in_box = 0.1 <= fit.f_c <= 0.35 and 0.3 <= fit.nu <= 0.8
    elapsed = time.time() - start
    ok = rho_dm2 > 0.9 and rho_s < -0.9 and synth_ok and in_box and elapsed < 7200
    assert report(
        10,
        ok,
        f"Spearman dM2 >= {rho_dm2:.3f}, S_half <= {rho_s:.3f}; synthetic recovery "
        f"(F_c {synth_fit.f_c:.3f}, nu {synth_fit.nu:.3f}); simulated collapse "
        f"F_c = {fit.f_c:.3f}, nu = {fit.nu:.3f} ({elapsed:.0f}s)",
    )


QUENCH_SMOKE = """
model: {{kind: chain, L: 4, J: 1.0, h: 1.0, F: 1.0}}
initial_state: {{kind: x_polarized}}
time_grid: {{spacing: logarithmic, t_min: 0.1, t_max: 10.0, n_points: 8}}
output: {{directory: "{out}"}}
seed: 42
"""

SHADOWS_SMOKE = """
model: {{kind: chain, L: 3, J: 1.0, h: 1.0, F: 0.5}}
initial_state: {{kind: y_polarized}}
protocol: {{n_settings: 60, n_shots: 8, times: [0.5, 2.0], n_bootstrap: 20}}
output: {{directory: "{out}"}}
seed: 7
"""


def _hash_outputs(path: Path) -> dict:
    skip = {"manifest.json", ".starkmagic.lock"}
    return {
        str(p.relative_to(path)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(path.rglob("*"))
        if p.is_file() and p.name not in skip
    }


def test_criterion_11_determinism(tmp_path):
    start = time.time()
    results = {}
    for name, template in (("quench", QUENCH_SMOKE), ("shadows", SHADOWS_SMOKE)):
        hashes = []
        for run in ("a", "b"):
            out = tmp_path / f"{name}_{run}"
            cfg = tmp_path / f"{name}_{run}.yaml"
            cfg.write_text(template.format(out=out), encoding="utf-8")
            proc = subprocess.run(
                [sys.executable, "-m", "starkmagic.cli", name, "--config", str(cfg)],
                capture_output=True, text=True,
            )
            assert proc.returncode == 0, proc.stderr
            hashes.append(_hash_outputs(out))
        results[name] = hashes[0] == hashes[1] and len(hashes[0]) > 0
    elapsed = time.time() - start
    ok = all(results.values()) and elapsed < 300
    assert report(
        11,
        ok,
        f"double-run hash equality: " + ", ".join(f"{k}={v}" for k, v in results.items())
        + f" ({elapsed:.0f}s)",
    )
