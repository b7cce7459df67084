"""Experiment configuration: TOML with unit suffixes in every dimensional key.

Example::

    [gas]
    pressure_bar = 76.0

    [pump]
    tl_duration_fs = 280.0
    energy_nJ = 220.0

Unknown keys are rejected (with a suggestion when a unit suffix is
missing), required keys are reported together, and errors name the key
path and its line in the file.
"""
from __future__ import annotations

import copy
import difflib
import math
import re
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

REQUIRED = object()
OPTIONAL = None


def _pair(v):
    return isinstance(v, list) and len(v) == 2 and all(_num(x) for x in v)


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _numlist(v):
    return isinstance(v, list) and len(v) >= 1 and all(_num(x) for x in v)


# type tag, default
SCHEMA = {
    "fiber": {
        "core_diameter_um": ("float", 18.5),
        "wall_thickness_nm": ("float", 240.0),
        "s_parameter": ("float", 0.03),
        "length_m": ("float", 0.3),
    },
    "gas": {
        "species": ("str", "argon"),
        "pressure_bar": ("float", REQUIRED),
        "temperature_K": ("float", 293.0),
    },
    "pump": {
        "center_nm": ("float", 800.0),
        "tl_duration_fs": ("float", OPTIONAL),
        "bandpass_fwhm_nm": ("float", OPTIONAL),
        "laser_tl_duration_fs": ("float", 140.0),
        "spectrum_csv": ("str", OPTIONAL),
        "chirp_fs2": ("float", 0.0),
        "energy_nJ": ("float", REQUIRED),
    },
    "grid": {
        "n": ("int", 4096),
        "span_thz": ("float", 200.0),
    },
    "jsa": {
        "signal_nm": ("pair", [600.0, 760.0]),
        "idler_nm": ("pair", [850.0, 1150.0]),
        "resolution": ("int", 128),
        "peak_power_W": ("float", OPTIONAL),
        "allow_pump_overlap": ("bool", False),
    },
    "schmidt": {
        "rank": ("int", 64),
        "cumulative": ("float", 1 - 1e-6),
    },
    "sim": {
        "nshots": ("int", 2500),
        "seed": ("int", 0),
        "sampler_variant": ("str", "HighGainConjugate"),
        "gain": ("float", OPTIONAL),
        "threads": ("int", 1),
    },
    "gnlse": {
        "n": ("int", 2048),
        "time_span_ps": ("float", 4.0),
        "error_goal": ("float", 1e-6),
        "dz_m": ("float", OPTIONAL),
        "self_steepening": ("bool", True),
        "kerr": ("bool", True),
        "loss_dB_per_m": ("float", 0.0),
        "z_saves": ("int", 0),
    },
    "detection": {
        "notch_nm": ("pair", OPTIONAL),
        "floor_dB": ("float", OPTIONAL),
        "cutoff_nm": ("float", OPTIONAL),
        "read_noise_var": ("float", 0.0),
        "seed": ("int", 0),
    },
    "analysis": {
        "signal_nm": ("pair", OPTIONAL),
        "idler_nm": ("pair", OPTIONAL),
        "rank_cutoff": ("int", OPTIONAL),
        "variance_floor": ("float", 1e-10),
        "tilt_threshold": ("float", 0.5),
        "band_center_nm": ("float", OPTIONAL),
        "band_width_nm": ("float", 4.0),
        "bootstrap_resamples": ("int", 200),
    },
    "scan": {
        "axis": ("str", OPTIONAL),
        "values": ("numlist", OPTIONAL),
        "pipeline": ("str", "analytic"),
    },
}

SCAN_AXES = {
    "pressure_bar": ("gas", "pressure_bar"),
    "chirp_fs2": ("pump", "chirp_fs2"),
    "power": ("pump", "energy_nJ"),
    "fiber_length_m": ("fiber", "length_m"),
}
CHOICES = {
    ("sim", "sampler_variant"): ("HighGainConjugate", "WignerExact"),
    ("scan", "axis"): tuple(SCAN_AXES),
    ("scan", "pipeline"): ("analytic", "gnlse"),
}
POSITIVE = {
    ("fiber", "core_diameter_um"), ("fiber", "wall_thickness_nm"), ("fiber", "length_m"),
    ("gas", "pressure_bar"), ("gas", "temperature_K"), ("pump", "center_nm"),
    ("pump", "tl_duration_fs"), ("pump", "bandpass_fwhm_nm"), ("pump", "laser_tl_duration_fs"),
    ("grid", "n"), ("grid", "span_thz"), ("jsa", "resolution"), ("schmidt", "rank"),
    ("sim", "nshots"), ("sim", "threads"), ("gnlse", "n"), ("gnlse", "time_span_ps"),
    ("gnlse", "error_goal"), ("gnlse", "dz_m"),
}
UNIT_SUFFIXES = ("_um", "_nm", "_m", "_bar", "_K", "_fs", "_fs2", "_nJ", "_thz", "_ps", "_W", "_dB", "_dB_per_m")

_CHECK = {"float": _num, "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
          "bool": lambda v: isinstance(v, bool), "str": lambda v: isinstance(v, str),
          "pair": _pair, "numlist": _numlist}


# keys that change how a result is computed but never the result
EXECUTION_KEYS = (("sim", "threads"),)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration with every default filled in."""

    data: dict
    source: str | None = None

    def __getitem__(self, section):
        return self.data[section]

    def get(self, section, key):
        return self.data[section][key]

    def to_dict(self):
        return copy.deepcopy(self.data)

    def replace(self, section, key, value) -> "ExperimentConfig":
        d = self.to_dict()
        d[section][key] = value
        return ExperimentConfig(validate(d), self.source)

    def dumps(self):
        return dumps(self.data)

    def result_dumps(self):
        """``dumps`` without execution-only keys (thread count), for provenance and digests."""
        d = self.to_dict()
        for section, key in EXECUTION_KEYS:
            d[section].pop(key, None)
        return dumps(d)


def _line_index(text):
    """Map (section, key) to 1-based line numbers with a light scan of the text."""
    index = {}
    section = ""
    for i, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.-]+)\s*\]$", s)
        if m:
            section = m.group(1)
            index.setdefault((section, None), i)
            continue
        m = re.match(r"^([A-Za-z0-9_-]+)\s*=", s)
        if m:
            index.setdefault((section, m.group(1)), i)
    return index


def _suggest(section, key):
    known = SCHEMA.get(section, {})
    stems = [k for k in known if any(k == key + suf for suf in UNIT_SUFFIXES) or k.startswith(key + "_")]
    if stems:
        return f"; missing unit suffix? did you mean '{stems[0]}'"
    close = difflib.get_close_matches(key, known, n=1)
    return f"; did you mean '{close[0]}'" if close else ""


def validate(raw: dict, lines=None) -> dict:
    """Check ``raw`` against the schema and return it with defaults applied."""
    lines = lines or {}

    def where(section, key=None):
        ln = lines.get((section, key)) or lines.get((section, None))
        path = section if key is None else f"{section}.{key}"
        return f"{path} (line {ln})" if ln else path

    errors = []
    out = {}
    for section, value in raw.items():
        if section not in SCHEMA:
            close = difflib.get_close_matches(section, SCHEMA, n=1)
            hint = f"; did you mean '[{close[0]}]'" if close else ""
            errors.append(f"unknown section {where(section)}{hint}")
        elif not isinstance(value, dict):
            errors.append(f"{where(section)} must be a table")
    missing = []
    for section, keys in SCHEMA.items():
        given = raw.get(section, {}) if isinstance(raw.get(section, {}), dict) else {}
        for key in given:
            if key not in keys:
                errors.append(f"unknown key {where(section, key)}{_suggest(section, key)}")
        sec = {}
        for key, (kind, default) in keys.items():
            # placeholder so cross-key checks still run after a bad value
            sec[key] = None if default is REQUIRED else copy.deepcopy(default)
            if key in given:
                v = given[key]
                if v is None and default is OPTIONAL:
                    continue  # unset optional key from a round-tripped dict
                if not _CHECK[kind](v):
                    errors.append(f"{where(section, key)}: expected {kind}, got {type(v).__name__} {v!r}")
                    continue
                if kind == "float":
                    v = float(v)
                    if not math.isfinite(v):
                        errors.append(f"{where(section, key)}: must be finite")
                        continue
                if kind in ("pair", "numlist"):
                    v = [float(x) for x in v]
                choices = CHOICES.get((section, key))
                if choices and v not in choices:
                    errors.append(f"{where(section, key)}: must be one of {', '.join(choices)}")
                    continue
                if (section, key) in POSITIVE and v <= 0:
                    errors.append(f"{where(section, key)}: must be positive")
                    continue
                sec[key] = v
            elif default is REQUIRED:
                missing.append(f"{section}.{key}")
        out[section] = sec

    pump = out["pump"]
    chosen = [k for k in ("tl_duration_fs", "bandpass_fwhm_nm", "spectrum_csv") if pump.get(k) is not None]
    if not chosen:
        missing.append("pump.tl_duration_fs | pump.bandpass_fwhm_nm | pump.spectrum_csv")
    elif len(chosen) > 1:
        errors.append(f"{where('pump')}: give only one of {', '.join('pump.' + k for k in chosen)}")
    scan = out["scan"]
    if (scan["axis"] is None) != (scan["values"] is None):
        errors.append(f"{where('scan')}: axis and values must be given together")
    elif scan["values"] is not None and len(scan["values"]) < 2:
        errors.append(f"{where('scan', 'values')}: a scan needs at least 2 points")
    if out["grid"]["n"] & (out["grid"]["n"] - 1):
        errors.append(f"{where('grid', 'n')}: must be a power of two")
    if out["gnlse"]["n"] & (out["gnlse"]["n"] - 1):
        errors.append(f"{where('gnlse', 'n')}: must be a power of two")
    if missing:
        errors.insert(0, "missing required keys: " + ", ".join(missing))
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return out


def loads(text: str, source=None) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source or 'config'}: {exc}") from exc
    return ExperimentConfig(validate(raw, _line_index(text)), source)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, str(path))


def default_config(**overrides) -> ExperimentConfig:
    """Defaults plus the required keys; ``overrides`` maps 'section.key' to values."""
    raw = {"gas": {"pressure_bar": 76.0}, "pump": {"tl_duration_fs": 280.0, "energy_nJ": 220.0}}
    for path, value in overrides.items():
        section, key = path.split(".")
        raw.setdefault(section, {})[key] = value
    return ExperimentConfig(validate(raw))


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return str(v)


def dumps(data: dict) -> str:
    """TOML text of a validated config; unset optional keys are omitted."""
    parts = []
    for section, keys in data.items():
        body = [f"{k} = {_toml_value(v)}" for k, v in keys.items() if v is not None]
        if body:
            parts.append(f"[{section}]\n" + "\n".join(body))
    return "\n\n".join(parts) + "\n"
