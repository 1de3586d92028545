"""CSV/JSON writers with byte-stable formatting, plus the run manifest.

All data files round-trip: floats are written with shortest-repr formatting,
rows in deterministic order, UTF-8, '.' decimals, comma separators.  NaN cells
(skipped diagnostics) serialize as empty strings.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError
from .magic import QuenchTrace


def fmt(x) -> str:
    """Shortest round-trip decimal for a float; empty for NaN."""
    x = float(x)
    if np.isnan(x):
        return ""
    return repr(x)


def parse_float(s: str) -> float:
    return float("nan") if s == "" else float(s)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(obj, version: str) -> str:
    return hashlib.sha256((canonical_json(obj) + "|" + version).encode()).hexdigest()[:16]


TRACE_HEADER = ["t", "M2", "S2_half", "S1_half", "energy", "sample_id"]


def write_trace_csv(path: Path, trace: QuenchTrace) -> None:
    """Documented quench-trace schema: t, M2, S2_half, S1_half, energy, sample_id."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for s, t, m2, s2, s1, en in trace.rows():
            w.writerow([fmt(t), fmt(m2), fmt(s2), fmt(s1), fmt(en), s])


def read_trace_csv(path: Path) -> dict:
    """Columns back as arrays keyed by header name (sample_id as int array)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ContractError(f"{path} does not carry the quench-trace schema")
        rows = list(reader)
    cols = {name: [] for name in header}
    for row in rows:
        for name, cell in zip(header, row):
            cols[name].append(cell)
    out = {name: np.array([parse_float(c) for c in cols[name]]) for name in TRACE_HEADER[:-1]}
    out["sample_id"] = np.array([int(c) for c in cols["sample_id"]])
    return out


def write_sidecar(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2))
        fh.write("\n")


# -- per-point sweep files (resumability) -----------------------------------


def write_point_csv(path: Path, trace: QuenchTrace, record, run_id: str) -> None:
    from dataclasses import asdict

    path.parent.mkdir(parents=True, exist_ok=True)
    rec = asdict(record)
    rec["window"] = list(rec["window"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# starkmagic-point v1 run_id={run_id}\n")
        fh.write("# meta: " + canonical_json(trace.meta) + "\n")
        fh.write("# record: " + canonical_json(rec) + "\n")
        fh.write("# m_haar: " + fmt(trace.m_haar) + "\n")
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for s, t, m2, s2, s1, en in trace.rows():
            w.writerow([fmt(t), fmt(m2), fmt(s2), fmt(s1), fmt(en), s])


def read_point_csv(path: Path):
    """Reconstruct (QuenchTrace, SaturationRecord) from a per-point file."""
    from .scaling import SaturationRecord

    meta, rec, m_haar = {}, None, float("nan")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# meta: "):
                meta = json.loads(line[len("# meta: "):])
            elif line.startswith("# record: "):
                rec = json.loads(line[len("# record: "):])
            elif line.startswith("# m_haar: "):
                m_haar = parse_float(line[len("# m_haar: "):].strip())
            elif line.startswith("#"):
                continue
            else:
                rows.append(line)
    reader = csv.reader(rows)
    header = next(reader)
    if header != TRACE_HEADER or rec is None:
        raise ContractError(f"{path} is not a sweep point file")
    data = list(reader)
    samples = sorted(set(int(r[5]) for r in data))
    times = sorted(set(parse_float(r[0]) for r in data))
    t_index = {t: j for j, t in enumerate(times)}
    shape = (len(samples), len(times))
    m2 = np.full(shape, np.nan)
    s2 = np.full(shape, np.nan)
    s1 = np.full(shape, np.nan)
    en = np.full(shape, np.nan)
    for r in data:
        j = t_index[parse_float(r[0])]
        s = int(r[5])
        m2[s, j] = parse_float(r[1])
        s2[s, j] = parse_float(r[2])
        s1[s, j] = parse_float(r[3])
        en[s, j] = parse_float(r[4])
    trace = QuenchTrace(
        times=np.array(times), m2=m2, s2_half=s2, s1_half=s1, energy=en,
        m_haar=m_haar, meta=meta,
    )
    record = SaturationRecord(
        L=int(rec["L"]), F=float(rec["F"]), initial_kind=rec["initial_kind"],
        m2_sat=float(rec["m2_sat"]), m2_err=float(rec["m2_err"]),
        s_half=float(rec["s_half"]), s_half_err=float(rec["s_half_err"]),
        window=tuple(rec["window"]), method=rec["method"],
    )
    return trace, record


# -- sweep observable tables -------------------------------------------------

SWEEP_HEADER = ["L", "F", "init", "value", "stderr", "window_lo", "window_hi", "run_id"]


def write_observable_csv(path: Path, records, observable: str, run_id: str) -> None:
    """One CSV per observable: {L, F, init, value, stderr, window_lo, window_hi, run_id}."""
    getter = {
        "m2_sat": lambda r: (r.m2_sat, r.m2_err),
        "delta_m2": lambda r: (r.delta_m2, r.m2_err),
        "s_half": lambda r: (r.s_half, r.s_half_err),
    }[observable]
    path.parent.mkdir(parents=True, exist_ok=True)
    ordered = sorted(records, key=lambda r: (r.L, r.F, r.initial_kind))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_HEADER)
        for r in ordered:
            v, e = getter(r)
            w.writerow([r.L, fmt(r.F), r.initial_kind, fmt(v), fmt(e),
                        fmt(r.window[0]), fmt(r.window[1]), run_id])


def write_collapse_json(path: Path, fits: dict) -> None:
    """{observable: {F_c, nu, cost, cost_unscaled, bootstrap}} exactly as fitted."""
    payload = {
        name: {
            "F_c": fit.f_c,
            "nu": fit.nu,
            "cost": fit.cost,
            "cost_unscaled": fit.cost_unscaled,
            "bootstrap": fit.bootstrap,
        }
        for name, fit in fits.items()
    }
    write_sidecar(path, payload)


PARAMETRIC_HEADER = ["L", "F", "t", "s_half", "m2", "f_factor"]


def write_parametric_csv(path: Path, relation, L: int) -> None:
    """Smoothed (S_half, M2) trajectories per F; m2 already divided by f(F)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PARAMETRIC_HEADER)
        for f in relation.f_values:
            for j, t in enumerate(relation.times):
                w.writerow([L, fmt(f), fmt(t), fmt(relation.s_half[f][j]),
                            fmt(relation.m2[f][j]), fmt(relation.f_factors[f])])


# -- estimator tables ---------------------------------------------------------

ESTIMATOR_HEADER = [
    "t", "estimator", "value", "stderr",
    "ci68_lo", "ci68_hi", "ci95_lo", "ci95_hi", "exact", "n_total",
]


def write_estimator_csv(path: Path, rows: Sequence[dict]) -> None:
    """{t, estimator, value, stderr, ci68, ci95} plus exact-oracle and shot-budget columns."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ESTIMATOR_HEADER)
        for row in rows:
            w.writerow([
                fmt(row["t"]), row["estimator"], fmt(row["value"]), fmt(row["stderr"]),
                fmt(row["ci68"][0]), fmt(row["ci68"][1]),
                fmt(row["ci95"][0]), fmt(row["ci95"][1]),
                fmt(row.get("exact", float("nan"))), int(row["n_total"]),
            ])


# -- run manifest --------------------------------------------------------------


@dataclass
class RunManifest:
    """Run identity and per-point status; the run id hashes config + code version."""

    run_id: str
    config: dict
    version: str
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    points: dict = field(default_factory=dict)

    @classmethod
    def create(cls, config: dict, version: str) -> "RunManifest":
        return cls(run_id=content_hash(config, version), config=config, version=version)

    def start(self):
        self.started_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    def finish(self):
        self.finished_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    def mark(self, point: str, status: str):
        self.points[point] = status

    def save(self, path: Path) -> None:
        write_sidecar(path, {
            "run_id": self.run_id,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "points": self.points,
            "config": self.config,
        })

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        m = cls(run_id=data["run_id"], config=data["config"], version=data["version"])
        m.started_at = data.get("started_at")
        m.finished_at = data.get("finished_at")
        m.points = data.get("points", {})
        return m
