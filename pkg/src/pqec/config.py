"""Strict TOML configuration for the study drivers.

A config file is TOML with optional top-level ``study``, ``label`` and
``seed`` keys and one table per section. Every key is typed; unknown keys,
unknown sections, wrong types and missing required sections are reported as
:class:`ConfigError` with the offending field and, when it came from the file,
its line number. ``key=value`` overrides are parsed as TOML values and
applied to the raw document before validation.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .lindblad import ExcitonParams
from .resources import ScalingAnsatz
from .surface_code import NoiseModel

STUDIES = ("extract", "fit", "dynamics", "resources")


class ConfigError(ValueError):
    pass


# Field types: "int", "float", "str", "bool", "floats" (scalar or array of numbers).
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "": {"study": ("str", None), "label": ("str", "default"), "seed": ("int", 0)},
    "noise": {"kind": ("str", "dephasing_only"), "p_phys": ("float", 0.01),
              "mismatch_factor": ("float", 1.0)},
    "ansatz": {"A": ("float", 0.1), "p_phys": ("float", 1e-3), "p_th": ("float", 1e-2),
               "C": ("float", 1.0)},
    "exciton": {k: ("float", v) for k, v in ExcitonParams().__dict__.items()},
    "budget": {"epsilon": ("float", 0.01), "m": ("int", 100), "zeta": ("float", 0.1),
               "eps_prog_A": ("float", 0.0), "nu": ("float", 0.0), "eps_prog_B": ("float", 0.0)},
    "extract": {"distance": ("int", 3), "method": ("str", "exact"),
                "samples": ("int", 1_000_000), "frame": ("str", "I")},
    "fit": {"mode": ("str", "single"), "target": ("str", "dephasing"),
            "gamma_tau": ("floats", (0.08,)), "strength": ("float", 0.3),
            "mismatch": ("floats", (0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15)),
            "library": ("str", "pauli_frames"), "lambda_unit": ("float", None),
            "eta": ("float", 1e-8), "allow_gap": ("bool", False),
            "distance_A": ("int", 3), "distance_B": ("int", 7), "workers": ("int", 1)},
    "dynamics": {"tau": ("float", 0.2), "m": ("int", 100), "distance_A": ("int", 3),
                 "distance_B": ("int", 7), "mismatch_factor": ("float", 1.06),
                 "eta": ("float", 0.1), "diamond_restarts": ("int", 4),
                 "p_logical_B": ("float", None)},
    "resources": {"n_logical": ("int", 2), "delta_tar": ("floats", (1e-3, 1e-2, 1e-1)),
                  "per_step": ("floats", (1e-4, 1e-5, 1e-6)), "tau": ("float", 0.2),
                  "use_model": ("bool", True)},
}

REQUIRED = {
    "extract": ("extract", "noise"),
    "fit": ("fit",),
    "dynamics": ("dynamics", "noise", "ansatz", "exciton"),
    "resources": ("resources", "ansatz", "budget"),
}

CHOICES = {
    ("noise", "kind"): ("depolarizing", "independent_xz", "dephasing_only"),
    ("extract", "method"): ("exact", "monte_carlo"),
    ("extract", "frame"): ("I", "X", "Y", "Z"),
    ("fit", "mode"): ("single", "study"),
    ("fit", "target"): ("dephasing", "amplitude_damping"),
    ("fit", "library"): ("pauli_frames", "z_frames", "reset_feedback"),
}


def _locate(text: str, section: str, key: str) -> int | None:
    """Line number (1-based) of ``key`` inside ``[section]`` in TOML source."""
    current = ""
    pat = re.compile(rf"^\s*(\"{re.escape(key)}\"|{re.escape(key)})\s*=")
    for i, line in enumerate(text.splitlines(), 1):
        head = re.match(r"^\s*\[\s*([^\]]+?)\s*\]", line)
        if head:
            current = head.group(1)
            if key == "" and current == section:
                return i
            continue
        if current == section and key and pat.match(line):
            return i
    return None


@dataclass
class Config:
    study: str
    label: str
    seed: int
    sections: dict = field(default_factory=dict)
    overrides: tuple = ()

    def get(self, section: str, key: str):
        return self.sections[section][key]

    def resolved(self) -> dict:
        return {"study": self.study, "label": self.label, "seed": self.seed,
                **{k: dict(v) for k, v in self.sections.items()}}

    # Typed views -----------------------------------------------------------

    def noise(self) -> NoiseModel:
        s = self.sections["noise"]
        return NoiseModel(s["kind"], s["p_phys"], s["mismatch_factor"])

    def ansatz(self) -> ScalingAnsatz:
        return ScalingAnsatz(**self.sections["ansatz"])

    def exciton(self) -> ExcitonParams:
        return ExcitonParams(**self.sections["exciton"])


def _coerce(kind: str, value, where: str):
    if kind == "bool":
        if isinstance(value, bool):
            return value
    elif kind == "int":
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind == "float":
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif kind == "str":
        if isinstance(value, str):
            return value
    elif kind == "floats":
        items = value if isinstance(value, list) else [value]
        if items and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in items):
            return tuple(float(v) for v in items)
    raise ConfigError(f"{where}: expected {kind}, got {type(value).__name__} {value!r}")


def parse_override(item: str) -> tuple[str, str, object]:
    """``section.key=value`` (or ``key=value`` for top-level keys)."""
    if "=" not in item:
        raise ConfigError(f"--override {item!r}: expected key=value")
    path, raw = item.split("=", 1)
    path = path.strip()
    section, _, key = path.rpartition(".")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return section, key, value


def load_config(study: str, path=None, overrides=(), seed: int | None = None) -> Config:
    """Parse, apply overrides and validate a config for ``study``."""
    if study not in STUDIES:
        raise ConfigError(f"unknown study {study!r}")
    text = ""
    raw: dict = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    name = str(path) if path is not None else "<defaults>"
    origin: dict = {}
    for item in overrides:
        section, key, value = parse_override(item)
        target = raw if section == "" else raw.setdefault(section, {})
        if not isinstance(target, dict):
            raise ConfigError(f"--override {item!r}: {section!r} is not a section")
        target[key] = value
        origin[(section, key)] = f"--override {item!r}"

    def where(section: str, key: str) -> str:
        field_name = f"{section}.{key}" if section else key
        if (section, key) in origin:
            return f"{origin[(section, key)]} ({field_name})"
        line = _locate(text, section, key) if section else _top_line(text, key)
        return f"{name}:{line} ({field_name})" if line else f"{name} ({field_name})"

    top = {k: v for k, v in raw.items() if not isinstance(v, dict)}
    tables = {k: v for k, v in raw.items() if isinstance(v, dict)}
    values = {"": {}}
    for key, value in top.items():
        if key not in SCHEMA[""]:
            raise ConfigError(f"{where('', key)}: unknown key {key!r}")
        values[""][key] = _coerce(SCHEMA[""][key][0], value, where("", key))
    for section, table in tables.items():
        if section not in SCHEMA or section == "":
            line = _locate(text, section, "")
            loc = f"{name}:{line}" if line else name
            raise ConfigError(f"{loc}: unknown section [{section}]")
        out = {}
        for key, value in table.items():
            if key not in SCHEMA[section]:
                known = ", ".join(SCHEMA[section])
                raise ConfigError(f"{where(section, key)}: unknown key {key!r} (allowed: {known})")
            out[key] = _coerce(SCHEMA[section][key][0], value, where(section, key))
            allowed = CHOICES.get((section, key))
            if allowed and out[key] not in allowed:
                raise ConfigError(f"{where(section, key)}: {out[key]!r} not in {allowed}")
        values[section] = out

    declared = values[""].get("study")
    if declared is not None and declared != study:
        raise ConfigError(f"{where('', 'study')}: config is for {declared!r}, not {study!r}")
    required = list(REQUIRED[study])
    if study == "fit" and values.get("fit", {}).get("mode") == "study":
        required += ["noise", "ansatz"]
    if study == "resources" and values.get("resources", {}).get("use_model", True):
        required.append("exciton")
    if path is not None:
        missing = [s for s in required if s not in values]
        if missing:
            raise ConfigError(f"{name}: missing required section(s) "
                              + ", ".join(f"[{s}]" for s in missing))
    sections = {}
    for section in dict.fromkeys([*required, *(s for s in values if s)]):
        defaults = {k: d for k, (_, d) in SCHEMA[section].items()}
        sections[section] = {**defaults, **values.get(section, {})}
    top_values = {k: d for k, (_, d) in SCHEMA[""].items()}
    top_values.update(values[""])
    if seed is not None:
        top_values["seed"] = seed
    if top_values["seed"] < 0:
        raise ConfigError(f"{where('', 'seed')}: seed must be non-negative")
    return Config(study, top_values["label"], top_values["seed"], sections, tuple(overrides))


def _top_line(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(r"^\s*\[", line):
            return None
        if pat.match(line):
            return i
    return None
