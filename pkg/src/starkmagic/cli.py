"""Command-line entry point: quench, sweep, shadows, theory.

Every run is deterministic from (config, seed): the master seed plus a stable
per-point stream derived from the point coordinates drives all randomness, so
adding sweep points never perturbs existing ones.  Output directories are
locked against concurrent invocations; data files are byte-reproducible (the
manifest carries wall-clock timestamps and is the one exception).

Env overrides mirror the flags with prefix STARKMAGIC_, e.g. STARKMAGIC_SEED,
STARKMAGIC_OUT, STARKMAGIC_THREADS.

Exit codes: 0 success, 2 config, 3 resource, 4 convergence, 5 resonance,
1 any other failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config, validate_config
from .errors import ConfigError, ResourceError, StarkMagicError
from .evolution import KrylovConfig, StrangStepSpec, TimeGrid, digital_evolve
from .hamiltonian import (
    ChainSpec,
    InitialStateSpec,
    LongRangeSpec,
    build_hamiltonian,
    prepare_initial_state,
)
from .magic import haar_reference, quench_trace, renyi_entanglement, sre
from .reporting import (
    RunManifest,
    write_collapse_json,
    write_estimator_csv,
    write_observable_csv,
    write_sidecar,
    write_trace_csv,
)
from .scaling import SweepSpec, crossover_curves, fit_collapse, point_id, point_stream, run_sweep, sanitize
from .shadows import (
    bootstrap_ci,
    global_purity_estimator,
    m2_estimator,
    purity_estimator,
    sample_settings_and_shots,
    w_estimator,
)
from .states import SeededRng
from .theory import LadderSpec, dephasing_front, fit_closure, front_from_root, j_eff_profile, sw_effective_diagonal

#: rough per-amplitude-visit cost used by the pre-flight estimate (seconds)
_COST_PER_OP = 4e-9


class OutputLock:
    """Reject concurrent runs on one output directory via an exclusive lock file."""

    def __init__(self, directory: Path):
        self.path = Path(directory) / ".starkmagic.lock"
        self.fd = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ResourceError(
                f"output directory is locked by another run ({self.path}); "
                "remove the lock file if that run is dead"
            ) from None
        os.write(self.fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc):
        if self.fd is not None:
            os.close(self.fd)
            self.path.unlink(missing_ok=True)


def _time_grid(cfg: dict) -> TimeGrid:
    tg = cfg["time_grid"]
    if tg["spacing"] == "linear":
        return TimeGrid.linear(tg["t_min"], tg["t_max"], tg["n_points"])
    return TimeGrid.logarithmic(tg["t_min"], tg["t_max"], tg["n_points"])


def _model(cfg: dict):
    m = cfg["model"]
    if m["kind"] == "chain":
        return ChainSpec(L=m["L"], J=m["J"], h=m["h"], F=m["F"])
    if m["couplings"] is not None:
        return LongRangeSpec(m["L"], np.asarray(m["couplings"]), h=m["h"], F=m["F"])
    pl = m["power_law"]
    cutoff = pl["cutoff"] if pl["cutoff"] > 0 else None
    return LongRangeSpec.power_law(m["L"], J0=pl["J0"], alpha=pl["alpha"], cutoff=cutoff,
                                   h=m["h"], F=m["F"])


def _estimate_seconds(l_values, n_points, m2_points) -> float:
    total = 0.0
    for L in l_values:
        evolve = n_points * 30 * L * (1 << L)  # krylov-ish matvec budget
        m2 = m2_points * L * (1 << (2 * L))
        total += (evolve + m2) * _COST_PER_OP
    return total


def _preflight(cfg: dict, l_values, n_points, m2_points) -> float:
    est = _estimate_seconds(l_values, n_points, m2_points)
    budget = cfg["limits"]["max_estimated_seconds"]
    print(f"[starkmagic] estimated compute: ~{est:.0f} s (budget {budget:.0f} s)")
    if est > budget:
        raise ResourceError(
            f"estimated {est:.0f} s exceeds limits.max_estimated_seconds={budget:.0f}"
        )
    return est


def _krylov(cfg: dict) -> KrylovConfig:
    p = cfg["propagator"]
    return KrylovConfig(m=p["krylov_m"], tol=p["krylov_tol"])


def physics_config(cfg: dict) -> dict:
    """Config without the output section: the run identity must not depend on
    where the files land, only on what is computed."""
    return {k: v for k, v in cfg.items() if k != "output"}


def _manifest(cfg: dict, out: Path) -> RunManifest:
    manifest = RunManifest.create(physics_config(cfg), __version__)
    manifest.start()
    return manifest


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_quench(cfg: dict, out: Path) -> None:
    model = _model(cfg)
    grid = _time_grid(cfg)
    manifest = _manifest(cfg, out)
    init_cfg = cfg["initial_state"]
    kinds = [init_cfg["kind"]]
    _preflight(cfg, [model.L], len(grid), len(grid))

    ham = build_hamiltonian(model, max_qubits=cfg["limits"]["max_qubits"])
    for kind in kinds:
        label = point_id(model.L, model.F, kind)
        init = InitialStateSpec(
            kind,
            n_samples=init_cfg["n_samples"] if kind == "random_bloch" else 1,
            seed=point_stream(cfg["seed"], label),
        )
        states = prepare_initial_state(init, model.L, model=model)
        method = cfg["propagator"]["method"]
        sink = None
        if cfg["diagnostics"]["snapshot_states"]:
            from .states import save_state_raw

            snap_dir = out / "snapshots"
            snap_dir.mkdir(parents=True, exist_ok=True)

            def sink(s_id, j, state, _kind=kind):
                save_state_raw(state, snap_dir / f"{sanitize(point_id(model.L, model.F, _kind, s_id))}_t{j}.bin")

        if method == "strang":
            traces = _strang_trace(cfg, model, states, grid, kind, init.seed)
        else:
            traces = quench_trace(
                ham, states, grid,
                propagator=method if method != "strang" else "auto",
                krylov=_krylov(cfg),
                max_qubits=cfg["limits"]["max_qubits"],
                meta={"L": model.L, "F": model.F, "initial_kind": kind, "seed": init.seed},
                state_sink=sink,
            )
        for s in range(traces.n_samples):
            sub = _single_sample(traces, s)
            fname = sanitize(point_id(model.L, model.F, kind, s)) + ".csv"
            write_trace_csv(out / fname, sub)
            manifest.mark(fname, "done")
    write_sidecar(out / "trace_meta.json", {
        "run_id": manifest.run_id, "seed": cfg["seed"], "config": physics_config(cfg),
        "m_haar": haar_reference(model.L),
    })
    manifest.finish()
    manifest.save(out / "manifest.json")
    print(f"[starkmagic] quench complete: run {manifest.run_id} -> {out}")


def _single_sample(trace, s):
    from .magic import QuenchTrace

    return QuenchTrace(
        times=trace.times,
        m2=trace.m2[s : s + 1],
        s2_half=trace.s2_half[s : s + 1],
        s1_half=trace.s1_half[s : s + 1],
        energy=trace.energy[s : s + 1],
        m_haar=trace.m_haar,
        meta=dict(trace.meta, sample=s),
    )


def _strang_trace(cfg, model, states, grid, kind, seed):
    """Digital (Strang) evolution sampled at the nearest step to each grid point."""
    from .magic import QuenchTrace, half_chain_cut

    dt = cfg["propagator"]["strang_dt"]
    ks = sorted(set(max(0, int(round(t / dt))) for t in grid.points))
    spec = StrangStepSpec.from_model(model, dt, n_steps=max(ks))
    ham = build_hamiltonian(model, max_qubits=cfg["limits"]["max_qubits"])
    shape = (len(states), len(ks))
    m2 = np.full(shape, np.nan)
    s2 = np.full(shape, np.nan)
    s1 = np.full(shape, np.nan)
    en = np.full(shape, np.nan)
    for i, psi0 in enumerate(states):
        evolved = digital_evolve(psi0, spec, model, emit_at=ks)
        for j, st in enumerate(evolved):
            ent = renyi_entanglement(st, half_chain_cut(model.L))
            s2[i, j] = ent.renyi2
            s1[i, j] = ent.von_neumann
            en[i, j] = ham.expectation(st)
            m2[i, j] = sre(st).m_alpha
    times = np.array([k * dt for k in ks])
    if times[0] == 0.0:
        times[0] = min(grid.points[0], dt) / 2  # keep the grid strictly positive for log plots
    return QuenchTrace(times=times, m2=m2, s2_half=s2, s1_half=s1, energy=en,
                       m_haar=haar_reference(model.L),
                       meta={"L": model.L, "F": model.F, "initial_kind": kind,
                             "seed": seed, "dt": dt})


def cmd_sweep(cfg: dict, out: Path, threads: int = 1) -> None:
    sw = cfg["sweep"]
    grid = _time_grid(cfg)
    manifest = _manifest(cfg, out)
    m2_points = len(grid) if not cfg["diagnostics"]["m2_window_only"] else max(1, len(grid) // 3)
    _preflight(cfg, [L for L in sw["l_values"] for _ in sw["f_values"]], len(grid), m2_points)

    spec = SweepSpec(
        f_values=tuple(sw["f_values"]),
        l_values=tuple(sw["l_values"]),
        initial_kinds=tuple(sw["initial_kinds"]),
        grid=grid,
        J=cfg["model"]["J"],
        h=cfg["model"]["h"],
        n_samples=sw["n_samples"],
        seed=cfg["seed"],
        saturation=sw["saturation"],
        m2_window_only=cfg["diagnostics"]["m2_window_only"],
        propagator=cfg["propagator"]["method"] if cfg["propagator"]["method"] != "strang" else "auto",
    )
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        traces, records = run_sweep(
            spec, out_dir=out, run_id=manifest.run_id,
            entropy_order=cfg["diagnostics"]["entanglement_order"],
            progress=lambda label: manifest.mark(label, "done"),
            executor=executor,
        )
    finally:
        if executor is not None:
            executor.shutdown()
    for name in ("m2_sat", "delta_m2", "s_half"):
        write_observable_csv(out / f"sweep_{name}.csv", records, name, manifest.run_id)
    write_sidecar(out / "sweep_meta.json", {
        "run_id": manifest.run_id,
        "seed": cfg["seed"],
        "config": physics_config(cfg),
        "m_haar": {str(L): haar_reference(L) for L in spec.l_values},
    })

    if sw["parametric"]["enabled"]:
        from .reporting import write_parametric_csv
        from .scaling import parametric_relation

        for L in spec.l_values:
            for kind in spec.initial_kinds:
                group = [
                    t for t in traces
                    if int(t.meta.get("L", -1)) == L and t.meta.get("initial_kind") == kind
                ]
                if len(group) >= 2:
                    rel = parametric_relation(
                        group,
                        sigma_decades=sw["parametric"]["sigma_decades"],
                        rescale=sw["parametric"]["rescale"],
                        entropy_order=cfg["diagnostics"]["entanglement_order"],
                    )
                    write_parametric_csv(out / f"parametric_L{L}_{kind}.csv", rel, L)

    if sw["collapse"]["enabled"] and len(spec.l_values) >= 3 and len(spec.f_values) >= 5:
        f_cap = sw["collapse"]["f_max"]
        fit_records = [r for r in records if f_cap <= 0 or r.F <= f_cap]
        curves = crossover_curves(fit_records)
        fits = {}
        for name in ("delta_m2", "s_half"):
            fits[name] = fit_collapse(
                curves[name],
                nu_range=(sw["collapse"]["nu_min"], sw["collapse"]["nu_max"]),
                n_bootstrap=sw["collapse"]["n_bootstrap"],
                rng=cfg["seed"],
            )
        write_collapse_json(out / "collapse.json", fits)
    manifest.finish()
    manifest.save(out / "manifest.json")
    print(f"[starkmagic] sweep complete: run {manifest.run_id} -> {out}")


def cmd_shadows(cfg: dict, out: Path) -> None:
    model = _model(cfg)
    proto = cfg["protocol"]
    manifest = _manifest(cfg, out)
    grid = TimeGrid(np.asarray(sorted(set(proto["times"]))))
    _preflight(cfg, [model.L], len(grid), len(grid))

    ham = build_hamiltonian(model, max_qubits=cfg["limits"]["max_qubits"])
    init_cfg = cfg["initial_state"]
    init = InitialStateSpec(
        init_cfg["kind"], n_samples=1,
        seed=point_stream(cfg["seed"], f"shadows|{init_cfg['kind']}"),
    )
    psi0 = prepare_initial_state(init, model.L, model=model)[0]
    from .evolution import EigenPropagator

    prop = EigenPropagator.build(ham)
    rows = []
    compare = proto["compare_exact"] and model.L <= 12
    for j, t in enumerate(grid.points):
        state = prop.at(psi0, t)
        rng = SeededRng(cfg["seed"], stream=point_stream(cfg["seed"], f"shots|t={t!r}"))
        batch = sample_settings_and_shots(state, proto["n_settings"], proto["n_shots"], rng)
        batch.save(out / f"shots_t{j}.bin")
        exact_m2 = sre(state).m_alpha if compare else float("nan")
        exact_ent = renyi_entanglement(state) if compare else None
        n_boot = proto["n_bootstrap"]
        wanted = proto["estimators"]
        if "purity" in wanted:
            est = purity_estimator(batch)
            if n_boot:
                est = bootstrap_ci(batch, purity_estimator, n_boot, rng)
            exact_pa = float(2.0 ** (-exact_ent.renyi2)) if compare else float("nan")
            rows.append(_row(t, "purity_A", est, exact_pa, batch))
            gl = global_purity_estimator(batch)
            if n_boot:
                gl = bootstrap_ci(batch, global_purity_estimator, n_boot, rng)
            rows.append(_row(t, "purity_global", gl, 1.0 if compare else float("nan"), batch))
        if "w" in wanted:
            est = w_estimator(batch)
            if n_boot:
                est = bootstrap_ci(batch, w_estimator, n_boot, rng)
            rows.append(_row(t, "w", est, float("nan"), batch))
        if "m2" in wanted:
            est = m2_estimator(batch)
            if n_boot:
                est = bootstrap_ci(batch, m2_estimator, n_boot, rng)
            rows.append(_row(t, "m2", est, exact_m2, batch))
        manifest.mark(f"t={t!r}", "done")
    write_estimator_csv(out / "estimators.csv", rows)
    write_sidecar(out / "shadows_meta.json", {
        "run_id": manifest.run_id, "config": physics_config(cfg),
        "n_total_per_time": proto["n_settings"] * proto["n_shots"],
    })
    manifest.finish()
    manifest.save(out / "manifest.json")
    print(f"[starkmagic] shadows complete: run {manifest.run_id} -> {out}")


def _row(t, name, est, exact, batch):
    return {
        "t": float(t), "estimator": name, "value": est.value, "stderr": est.stderr,
        "ci68": est.ci68, "ci95": est.ci95, "exact": exact, "n_total": batch.n_total,
    }


def cmd_theory(cfg: dict, out: Path) -> None:
    th = cfg["theory"]
    manifest = _manifest(cfg, out)
    import csv as _csv

    from .reporting import fmt

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "j_eff_profile.csv", "w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow(["L", "h", "J", "F", "r", "j_eff_numeric", "j_eff_factorial"])
        for L in th["l_values"]:
            for h in th["h_values"]:
                spec = LadderSpec(L, th["J"], h, th["F"])
                _, coup = sw_effective_diagonal(spec)
                prof = j_eff_profile(coup)
                for r in range(1, L):
                    w.writerow([L, fmt(h), fmt(th["J"]), fmt(th["F"]), r,
                                fmt(prof[r - 1]),
                                fmt(_factorial_ref(r, prof, h, th["F"]))])
                manifest.mark(f"L={L},h={fmt(h)}", "done")

    with open(out / "front_check.csv", "w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow(["h_over_F", "t_j0", "r_closed", "r_root"])
        for ratio in (0.05, 0.1, 0.2):
            for tj in np.geomspace(np.e, 1e6, 7):
                rc, _pre = dephasing_front(tj, 1.0, ratio, 1.0)
                rr = front_from_root(tj, 1.0, ratio, 1.0)
                w.writerow([fmt(ratio), fmt(tj), fmt(rc), fmt(rr)])

    # attach closure fits to any existing quench traces in the output directory
    if th["fit_traces"]:
        from .reporting import read_trace_csv

        fits = []
        curves = []
        for path in sorted(out.glob("L-*.csv")):
            data = read_trace_csv(path)
            keep = ~np.isnan(data["M2"])
            if keep.sum() < 8:
                continue
            try:
                fit = fit_closure(data["t"][keep], data["M2"][keep],
                                  h=cfg["model"]["h"], F=cfg["model"]["F"])
            except StarkMagicError:
                continue
            fits.append((path.name, fit))
            from .theory import closure_eval

            model_curve = closure_eval(data["t"], fit.model)
            curves.extend(
                (path.name, t, v) for t, v in zip(data["t"], np.atleast_1d(model_curve))
            )
        if fits:
            with open(out / "closure_fits.csv", "w", newline="", encoding="utf-8") as fh:
                w = _csv.writer(fh)
                w.writerow(["trace", "run_id", "M_sat", "gamma", "J0", "h_over_F",
                            "residual_rms", "degenerate"])
                for name, fit in fits:
                    w.writerow([name, manifest.run_id, fmt(fit.model.M_sat),
                                fmt(fit.model.gamma), fmt(fit.model.J0),
                                fmt(fit.model.hF_ratio),
                                fmt(fit.residual_rms), int(fit.degenerate)])
            # model curves on the trace grids so plots never re-evaluate the theory
            with open(out / "closure_curves.csv", "w", newline="", encoding="utf-8") as fh:
                w = _csv.writer(fh)
                w.writerow(["trace", "t", "m2_model"])
                for name, t, v in curves:
                    w.writerow([name, fmt(t), fmt(v)])
    write_sidecar(out / "theory_meta.json", {
        "run_id": manifest.run_id, "seed": cfg["seed"], "config": physics_config(cfg),
    })
    manifest.finish()
    manifest.save(out / "manifest.json")
    print(f"[starkmagic] theory complete: run {manifest.run_id} -> {out}")


def _factorial_ref(r, prof, h, F):
    from .theory import j_eff_factorial

    if h == 0:
        return 0.0
    return j_eff_factorial(r, prof[0] if prof.size else h, h, F)


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="starkmagic",
        description="Tilted-Ising quench simulator: magic and entanglement diagnostics",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("quench", "time traces of M2 and entanglement for one model"),
        ("sweep", "parameter sweep with saturation records and data collapse"),
        ("shadows", "randomized-measurement simulation with U-statistic estimators"),
        ("theory", "strong-tilt effective couplings, front check, closure fits"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        p.add_argument("--resume", default=None, metavar="RUN_ID",
                       help="resume an interrupted sweep with this run id")
    return parser


def _env_override(args):
    env = os.environ
    if args.out is None and env.get("STARKMAGIC_OUT"):
        args.out = env["STARKMAGIC_OUT"]
    if args.seed is None and env.get("STARKMAGIC_SEED"):
        args.seed = int(env["STARKMAGIC_SEED"])
    if args.threads is None and env.get("STARKMAGIC_THREADS"):
        args.threads = int(env["STARKMAGIC_THREADS"])
    return args


def main(argv=None) -> int:
    args = _env_override(build_parser().parse_args(argv))
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = validate_config({**cfg, "seed": args.seed})["seed"]
        out = Path(args.out) if args.out else Path(cfg["output"]["directory"])
        threads = args.threads if args.threads else cfg["threads"]
        if args.resume:
            manifest_path = out / "manifest.json"
            if manifest_path.exists():
                prev = RunManifest.load(manifest_path)
                if prev.run_id != args.resume:
                    raise ConfigError(
                        f"--resume {args.resume} does not match {prev.run_id} in {out}"
                    )
        with OutputLock(out):
            if args.command == "quench":
                cmd_quench(cfg, out)
            elif args.command == "sweep":
                cmd_sweep(cfg, out, threads=threads)
            elif args.command == "shadows":
                cmd_shadows(cfg, out)
            elif args.command == "theory":
                cmd_theory(cfg, out)
        return 0
    except StarkMagicError as exc:
        print(f"[starkmagic] error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
