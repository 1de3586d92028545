"""Run-config schema: YAML in, validated + default-filled dict out.

The schema is normative: unknown keys are rejected with the path to the
offending key, types are checked, and parse -> serialize -> parse is the
identity on the normalized form.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError

_REQUIRED = object()


def _num(lo=None, hi=None):
    def check(v, path):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {type(v).__name__}")
        v = float(v)
        if lo is not None and v < lo:
            raise ConfigError(f"{path}: must be >= {lo}")
        if hi is not None and v > hi:
            raise ConfigError(f"{path}: must be <= {hi}")
        return v

    return check


def _int(lo=None, hi=None):
    def check(v, path):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{path}: expected an integer, got {type(v).__name__}")
        if lo is not None and v < lo:
            raise ConfigError(f"{path}: must be >= {lo}")
        if hi is not None and v > hi:
            raise ConfigError(f"{path}: must be <= {hi}")
        return v

    return check


def _bool(v, path):
    if not isinstance(v, bool):
        raise ConfigError(f"{path}: expected true/false")
    return v


def _str(*allowed):
    def check(v, path):
        if not isinstance(v, str):
            raise ConfigError(f"{path}: expected a string")
        if allowed and v not in allowed:
            raise ConfigError(f"{path}: must be one of {allowed}, got {v!r}")
        return v

    return check


def _num_list(min_len=1):
    def check(v, path):
        if not isinstance(v, list) or len(v) < min_len:
            raise ConfigError(f"{path}: expected a list of >= {min_len} numbers")
        return [float(_num()(x, f"{path}[{i}]")) for i, x in enumerate(v)]

    return check


def _int_list(min_len=1):
    def check(v, path):
        if not isinstance(v, list) or len(v) < min_len:
            raise ConfigError(f"{path}: expected a list of >= {min_len} integers")
        return [int(_int()(x, f"{path}[{i}]")) for i, x in enumerate(v)]

    return check


def _str_list(allowed):
    def check(v, path):
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{path}: expected a nonempty list of strings")
        return [_str(*allowed)(x, f"{path}[{i}]") for i, x in enumerate(v)]

    return check


def _matrix(v, path):
    if v is None:
        return None
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: expected a numeric matrix") from None
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"{path}: expected a square matrix")
    return arr.tolist()


_INIT_KINDS = ("z_polarized", "x_polarized", "y_polarized", "z_star", "random_bloch")

# (default, checker); _REQUIRED defaults must be supplied by the user
SCHEMA: dict = {
    "model": {
        "kind": ("chain", _str("chain", "long_range")),
        "L": (8, _int(2)),
        "J": (1.0, _num()),
        "h": (1.0, _num()),
        "F": (1.0, _num()),
        "couplings": (None, _matrix),
        "power_law": {
            "enabled": (False, _bool),
            "J0": (1.0, _num()),
            "alpha": (1.13, _num(0.0)),
            "cutoff": (0, _int(0)),  # 0 = no cutoff
        },
    },
    "initial_state": {
        "kind": ("x_polarized", _str(*_INIT_KINDS)),
        "n_samples": (1, _int(1)),
    },
    "time_grid": {
        "spacing": ("logarithmic", _str("logarithmic", "linear")),
        "t_min": (0.1, _num(0.0)),
        "t_max": (1000.0, _num(0.0)),
        "n_points": (120, _int(2)),
    },
    "diagnostics": {
        "m2": (True, _bool),
        "entanglement_order": (1, _int(1, 2)),
        "m2_window_only": (False, _bool),
        "snapshot_states": (False, _bool),
    },
    "propagator": {
        "method": ("auto", _str("auto", "krylov", "eigen", "strang")),
        "krylov_m": (30, _int(2)),
        "krylov_tol": (1e-10, _num(0.0)),
        "strang_dt": (0.05, _num(0.0)),
    },
    "protocol": {
        "n_settings": (200, _int(1)),
        "n_shots": (16, _int(1)),
        "times": ([1.0], _num_list(1)),
        "n_bootstrap": (200, _int(0)),
        "estimators": (["purity", "w", "m2"], _str_list(("purity", "w", "m2"))),
        "compare_exact": (True, _bool),
    },
    "sweep": {
        "f_values": ([0.2, 0.5, 1.0, 2.0, 5.0], _num_list(1)),
        "l_values": ([6, 8], _int_list(1)),
        "initial_kinds": (["y_polarized"], _str_list(_INIT_KINDS)),
        "n_samples": (1, _int(1)),
        "saturation": ("auto", _str("auto", "fit", "window")),
        "collapse": {
            "enabled": (True, _bool),
            "nu_min": (0.2, _num(0.01)),
            "nu_max": (1.5, _num(0.01)),
            "n_bootstrap": (100, _int(0)),
            # scaling-window cap: collapse fits only F <= f_max (0 = no cap);
            # the deep-localized branch sits outside the crossover scaling regime
            "f_max": (0.0, _num(0.0)),
        },
        "parametric": {
            "enabled": (True, _bool),
            "sigma_decades": (0.1, _num(0.0)),
            "rescale": (False, _bool),
        },
    },
    "theory": {
        "l_values": ([4, 6], _int_list(1)),
        "h_values": ([0.0, 0.5, 1.0], _num_list(1)),
        "J": (1.0, _num()),
        "F": (10.0, _num(0.0)),
        "fit_traces": (True, _bool),
    },
    "output": {
        "directory": ("runs/out", _str()),
    },
    "seed": (12345, _int(0)),
    "threads": (1, _int(1)),
    "limits": {
        "max_qubits": (14, _int(2, 20)),
        "max_estimated_seconds": (7200.0, _num(0.0)),
    },
}


def _normalize(raw: Any, schema: dict, path: str) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    unknown = set(raw) - set(schema)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"{path + '.' if path else ''}{key}: unknown key")
    out = {}
    for key, entry in schema.items():
        sub_path = f"{path}.{key}" if path else key
        if isinstance(entry, dict):
            out[key] = _normalize(raw.get(key), entry, sub_path)
        else:
            default, checker = entry
            if key in raw:
                out[key] = checker(raw[key], sub_path)
                if isinstance(out[key], float) and isinstance(default, float):
                    pass
            else:
                if default is _REQUIRED:
                    raise ConfigError(f"{sub_path}: required key missing")
                out[key] = default
    return out


def validate_config(raw: dict) -> dict:
    """Normalized config dict with defaults filled; raises ConfigError with a key path."""
    cfg = _normalize(raw, SCHEMA, "")
    tg = cfg["time_grid"]
    if tg["t_min"] >= tg["t_max"]:
        raise ConfigError("time_grid.t_min: must be below time_grid.t_max")
    if tg["spacing"] == "logarithmic" and tg["t_min"] <= 0:
        raise ConfigError("time_grid.t_min: logarithmic spacing needs t_min > 0")
    if cfg["model"]["L"] > cfg["limits"]["max_qubits"]:
        raise ConfigError("model.L: exceeds limits.max_qubits")
    if "m2" in cfg["protocol"]["estimators"] or "w" in cfg["protocol"]["estimators"]:
        if cfg["protocol"]["n_shots"] < 4:
            raise ConfigError(
                "protocol.n_shots: the fourth-moment estimator requires N_M >= 4"
            )
    if cfg["protocol"]["n_shots"] < 2:
        raise ConfigError("protocol.n_shots: purity estimation requires N_M >= 2")
    return cfg


def load_config(path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from None
    return validate_config(raw if raw is not None else {})


def dump_config(cfg: dict) -> str:
    """Serialization that round-trips through validate_config unchanged."""
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def config_fingerprint(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))
