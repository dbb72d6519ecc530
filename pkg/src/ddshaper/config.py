"""
Run configuration: a sectioned TOML file (or its JSON echo) with units in key names.

A key such as ``tau_ns = 51.298`` is stored as ``tau = 5.1298e-08``. Bare keys
are taken to be SI already, which is how the JSON echo written next to every
run stores them. Angular rates (``detuning``, ``larmor``, hyperfine constants,
``gamma``) accept cyclic suffixes like ``_mhz`` and are multiplied by 2 pi;
``_rad_s`` is taken as is.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ValidationError

TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12}
FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
FIELD = {"t": 1.0, "mt": 1e-3, "ut": 1e-6, "nt": 1e-9}
ANGULAR = {"rad_s": 1.0, **{k: 2 * math.pi * v for k, v in FREQ.items()}}
GAMMA = {"rad_s_t": 1.0, **{f"{k}_t": 2 * math.pi * v for k, v in FREQ.items()}}
UNITS = {"time": TIME, "freq": FREQ, "field": FIELD, "angular": ANGULAR, "gamma": GAMMA}

# key -> kind; kinds not in UNITS are unitless
SCHEMA = {
    "sensor": {"gamma": "gamma", "t2": "time"},
    "sequence": {
        "n_pulses": "int", "tau": "time", "t_pi": "time", "shape": "str", "phase_cycle": "str",
    },
    "drive": {
        "detuning": "angular", "substeps_per_sample": "int", "sample_rate": "freq",
        "vertical_bits": "int",
    },
    "bath": {"larmor": "angular", "couplings": "couplings"},
    "signals": {"f_ac": "freq", "b_ac": "field"},
    "scan": {
        "tau_start": "time", "tau_step": "time", "n_points": "int",
        "f_start": "freq", "f_stop": "freq", "shapes": "strlist",
    },
    "waveform": {
        "sample_rate": "freq", "vertical_bits": "int", "n_samples": "int",
        "peak_amplitude": "float", "carrier": "freq", "carrier_phase": "float",
    },
    "output": {"dir": "str", "format": "str", "plot": "bool", "threads": "int"},
    "experiment": {"kind": "str"},
}

# parameters of the figure runners (see harness.DEFAULTS)
EXPERIMENT_KINDS = {
    "gamma": "gamma", "t2": "time", "f_ac": "freq", "b_ac": "field", "n_pulses": "int",
    "t_pi": "time", "tau_start": "time", "tau_step": "time", "n_points": "int",
    "vertical_bits": "int", "n_list": "intlist", "window_nulls": "float", "t_sample": "time",
    "delta_f": "freq", "margin_nulls": "float", "larmor": "angular", "a_par": "angular",
    "a_perp": "angular", "extra_couplings": "couplings", "detuning": "angular",
    "substeps_per_sample": "int", "phase_cycle": "str", "f_start": "freq", "f_stop": "freq",
    "shape": "str",
}


def split_key(key: str, kinds: dict) -> tuple[str, float]:
    """Resolve ``key`` to ``(base, factor)``; raises naming the key if unknown."""
    if key in kinds:
        return key, 1.0
    for base, kind in kinds.items():
        table = UNITS.get(kind)
        if kind == "couplings":
            table = ANGULAR
        if table and key.startswith(base + "_"):
            suffix = key[len(base) + 1:]
            if suffix in table:
                return base, table[suffix]
    raise ValidationError(f"unknown key {key!r}", key=key)


def _coerce(value, kind: str, factor: float, key: str):
    try:
        if value is None:
            return None
        if kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if kind == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "strlist":
            if isinstance(value, str):
                value = value.split(",")
            return [str(v).strip() for v in value]
        if kind == "intlist":
            if isinstance(value, str):
                value = value.split(",")
            return [_coerce(float(v) if isinstance(v, str) else v, "int", 1.0, key) for v in value]
        if kind == "couplings":
            out = []
            for pair in value:
                a_par, a_perp = pair
                out.append([float(a_par) * factor, float(a_perp) * factor])
            return out
        if isinstance(value, bool):
            raise TypeError
        x = float(value) * factor
        if not math.isfinite(x):
            raise ValidationError(f"{key} must be finite", key=key)
        return x
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad value for {key!r}: {value!r}", key=key) from None


def normalize_table(table: dict, kinds: dict, where: str = "") -> dict:
    out = {}
    for key, value in table.items():
        base, factor = split_key(key, kinds)
        if base in out:
            raise ValidationError(f"{where}{base} given twice", key=key)
        out[base] = _coerce(value, kinds[base], factor, f"{where}{key}")
    return out


def normalize(raw: dict) -> dict:
    """Normalize a raw section mapping to SI values."""
    cfg = {}
    for section, body in raw.items():
        if section not in SCHEMA and section != "overrides":
            raise ValidationError(f"unknown section [{section}]", key=section)
        if section == "overrides":
            cfg[section] = normalize_table(body, EXPERIMENT_KINDS, "overrides.")
        elif section == "signals":
            if isinstance(body, dict):
                body = [body]
            cfg[section] = [normalize_table(s, SCHEMA[section], "signals.") for s in body]
        else:
            if not isinstance(body, dict):
                raise ValidationError(f"[{section}] must be a table", key=section)
            cfg[section] = normalize_table(body, SCHEMA[section], f"{section}.")
    return cfg


def load_config(path) -> dict:
    """Read a TOML config or a JSON echo (``params.json``) into SI sections."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}", key="config") from None
    try:
        if path.suffix == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"cannot parse config {path}: {exc}", key="config") from None
    if path.suffix == ".json":
        raw = _from_echo(raw)
    return normalize(raw)


def _from_echo(raw: dict) -> dict:
    # params.json written by a run: {"config": {...}} or {"kind": ..., "params": {...}}
    if "config" in raw:
        return raw["config"]
    if "params" in raw:
        return {"experiment": {"kind": raw["kind"]}, "overrides": raw["params"]}
    return raw


def parse_assignment(text: str) -> tuple[str, object]:
    """``key=value`` with the value read as JSON when possible (else a string)."""
    if "=" not in text:
        raise ValidationError(f"expected key=value, got {text!r}", key=text)
    key, value = text.split("=", 1)
    key = key.strip()
    try:
        return key, json.loads(value)
    except ValueError:
        return key, value.strip()


def set_value(cfg: dict, section: str, key: str, value) -> None:
    """Apply one flag value, given with the key's unit suffix, onto ``cfg``."""
    kinds = SCHEMA[section]
    base, factor = split_key(key, kinds)
    coerced = _coerce(value, kinds[base], factor, f"{section}.{key}")
    if section == "signals":
        signals = cfg.setdefault("signals", [])
        if not signals:
            signals.append({})
        signals[0][base] = coerced
    else:
        cfg.setdefault(section, {})[base] = coerced
