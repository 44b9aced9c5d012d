"""Line-oriented run configuration with explicit units.

Format::

    [run]
    subcommand = excitation
    seed = 1729

    [model]
    lambda = 1e-16 /s
    a = 1e-5 cm

Every physical quantity must carry a unit from :data:`UNITS`; the value is
converted to the package's internal unit on parsing. Lists are comma
separated with one trailing unit. ``#`` starts a comment. Unknown sections
or keys, missing or wrong units, and out-of-range values are all reported
together in one :class:`ConfigError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .params import (
    FINE_STRUCTURE,
    GRW_A,
    GRW_LAMBDA,
    HBAR_C_MEV_CM,
    PROTON_MASS_MEV,
    ModelParams,
)

DEFAULT_SEED = 1729

SUBCOMMANDS = ("kernels", "collapse-rate", "energy-rate", "simulate", "excitation", "scan")

# unit token -> factor to the internal unit, grouped by dimension
UNITS = {
    "rate": {"/s": 1.0, "1/s": 1.0, "s^-1": 1.0, "/day": 1.0 / 86400.0, "/yr": 1.0 / 3.15576e7},
    "length": {"cm": 1.0, "m": 100.0, "mm": 0.1, "um": 1e-4, "nm": 1e-7, "fm": 1e-13},
    "energy": {"MeV": 1.0, "GeV": 1e3, "keV": 1e-3, "eV": 1e-6},
    "wavenumber": {"/cm": 1.0, "1/cm": 1.0, "cm^-1": 1.0, "/m": 0.01},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12, "fs": 1e-15},
    "density": {"/kg": 1.0, "1/kg": 1.0, "/g": 1e3},
    # simulation units
    "a": {"a": 1.0},
    "/a": {"/a": 1.0, "1/a": 1.0},
    "/lambda": {"/lambda": 1.0, "1/lambda": 1.0},
}


class ConfigError(ValueError):
    """Every problem found in a configuration, one message per entry."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class Key:
    kind: str                  # float, int, str, list
    unit: str | None = None    # dimension name from UNITS, None for dimensionless
    default: object = None
    bound: str = "positive"    # positive, nonnegative, unit_interval, any
    choices: tuple = ()


def _k(kind, unit=None, default=None, bound="positive", choices=()):
    return Key(kind, unit, default, bound, choices)


SCHEMA = {
    "run": {
        "subcommand": _k("str", default="excitation", choices=SUBCOMMANDS),
        "seed": _k("int", default=DEFAULT_SEED, bound="nonnegative"),
    },
    "model": {
        "lambda": _k("float", "rate", GRW_LAMBDA),
        "a": _k("float", "length", GRW_A),
        "mass": _k("float", "energy", PROTON_MASS_MEV),
        "mu": _k("float", None, None),
        "alpha_fs": _k("float", None, FINE_STRUCTURE),
    },
    "kernels": {
        "mu_values": _k("list", None, (0.5, 1.0, 10.0, 100.0)),
        "momenta": _k("list", "/a", (0.0, 1.0, 5.0), bound="nonnegative"),
        # Fourier-kernel points as M r, i.e. in Compton wavelengths
        "compton_radii": _k("list", None, (1.0, 3.0)),
        "profile_mu": _k("float", None, 10.0),
        "profile_separations": _k("list", "a", (0.0, 1.0, 2.0, 4.0, 8.0, 10.0), bound="nonnegative"),
        "profile_samples": _k("int", None, 200_000),
    },
    "collapse": {
        "separation": _k("float", "a", 10.0, bound="nonnegative"),
        "width": _k("float", "a", 0.5),
        "weight_L": _k("float", None, 0.5, bound="unit_interval"),
        "mu_values": _k("list", None, (1.0, 10.0, 100.0, 1000.0)),
    },
    "energy": {
        "mu_min": _k("float", None, 10.0),
        "mu_max": _k("float", None, 1e7),
        "points_per_decade": _k("int", None, 2),
        "particles": _k("int", None, 1),
    },
    "simulate": {
        "variant": _k("str", default="CSL", choices=("CSL", "QRCSL")),
        "mu": _k("float", None, 1000.0),
        "p_max": _k("float", "/a", None),
        "n_points": _k("int", None, 64),
        "dx": _k("float", "a", 0.3),
        "dt": _k("float", "/lambda", 0.05),
        "t_final": _k("float", "/lambda", 1.0),
        "n_traj": _k("int", None, 1000),
        "scheme": _k("str", default="cooked", choices=("cooked", "raw")),
        "record_every": _k("int", None, 1),
        "separation": _k("float", "a", 10.0, bound="nonnegative"),
        "width": _k("float", "a", 0.5),
        "weight_L": _k("float", None, 0.5, bound="unit_interval"),
    },
    "nucleus": {
        "label": _k("str", default="Ge-74"),
        "k": _k("float", "wavenumber", 3.2e10),
        "tau": _k("float", "time", 17.9e-12),
        "delta_e": _k("float", "energy", 0.596),
        "nuclei_per_kg": _k("float", "density", 3.0e24),
        "nuclei_per_kg_all": _k("float", "density", 8.3e24),
    },
    "scan": {
        "lambda_min": _k("float", "rate", 1e-30),
        "lambda_max": _k("float", "rate", 1e-8),
        "lambda_points": _k("int", None, 23, bound="nonnegative"),
        "a_min": _k("float", "length", 1e-7),
        "a_max": _k("float", "length", 1e-3),
        "a_points": _k("int", None, 5, bound="nonnegative"),
    },
}

# canonical unit written back in the echo
_CANONICAL = {"rate": "/s", "length": "cm", "energy": "MeV", "wavenumber": "/cm", "time": "s",
              "density": "/kg", "a": "a", "/a": "/a", "/lambda": "/lambda"}


@dataclass
class RunConfig:
    """Validated configuration; ``values[section][key]`` in internal units."""

    values: dict = field(default_factory=dict)

    @property
    def subcommand(self):
        return self.values["run"]["subcommand"]

    @property
    def seed(self):
        return self.values["run"]["seed"]

    def section(self, name):
        return self.values[name]

    def params(self) -> ModelParams:
        m = self.values["model"]
        if m["mu"] is not None:
            M = m["mu"] / m["a"]
        else:
            M = m["mass"] / HBAR_C_MEV_CM
        return ModelParams(lam=m["lambda"], a=m["a"], M=M, alpha_fs=m["alpha_fs"])

    def with_seed(self, seed):
        values = {s: dict(v) for s, v in self.values.items()}
        values["run"]["seed"] = int(seed)
        return RunConfig(values)

    def to_text(self):
        """Canonical text form; parsing it gives back an equal config."""
        lines = []
        for sec, keys in SCHEMA.items():
            lines.append(f"[{sec}]")
            for name, spec in keys.items():
                value = self.values[sec][name]
                if value is None:
                    continue
                lines.append(f"{name} = {_render(value, spec)}")
            lines.append("")
        return "\n".join(lines)

    def to_dict(self):
        return {sec: {k: (list(v) if isinstance(v, tuple) else v) for k, v in keys.items()}
                for sec, keys in self.values.items()}


def _render(value, spec):
    unit = "" if spec.unit is None else " " + _CANONICAL[spec.unit]
    if spec.kind == "list":
        return ", ".join(repr(float(v)) for v in value) + unit
    if spec.kind == "float":
        return repr(float(value)) + unit
    return str(value)


def _check_bound(name, value, bound):
    if bound == "positive" and not value > 0:
        return f"{name}: must be positive, got {value!r}"
    if bound == "nonnegative" and not value >= 0:
        return f"{name}: must be non-negative, got {value!r}"
    if bound == "unit_interval" and not 0.0 <= value <= 1.0:
        return f"{name}: must lie in [0, 1], got {value!r}"
    return None


def _parse_value(where, spec, raw):
    errors = []
    text = raw.strip()
    factor = 1.0
    if spec.unit is not None:
        head, _, unit = text.rpartition(" ")
        table = UNITS[spec.unit]
        if not head or unit not in table:
            if unit in table:
                errors.append(f"{where}: missing value")
            elif not head:
                errors.append(f"{where}: missing unit (expected one of {', '.join(table)})")
            else:
                errors.append(f"{where}: unit {unit!r} not allowed (expected one of {', '.join(table)})")
            return None, errors
        text, factor = head.strip(), table[unit]
    if spec.kind == "str":
        if spec.choices and text not in spec.choices:
            errors.append(f"{where}: {text!r} is not one of {', '.join(spec.choices)}")
        return text, errors
    items = [t.strip() for t in text.split(",")] if spec.kind == "list" else [text]
    out = []
    for item in items:
        try:
            if spec.kind == "int":
                v = int(item)
            else:
                v = float(item)
                if not math.isfinite(v):
                    raise ValueError
                v *= factor
        except ValueError:
            errors.append(f"{where}: cannot read {item!r} as {'an integer' if spec.kind == 'int' else 'a number'}")
            continue
        msg = _check_bound(where, v, spec.bound)
        if msg:
            errors.append(msg)
        out.append(v)
    if spec.kind == "list":
        return tuple(out), errors
    return (out[0] if out else None), errors


def defaults():
    return RunConfig({sec: {k: spec.default for k, spec in keys.items()} for sec, keys in SCHEMA.items()})


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text.

    Raises :class:`ConfigError` listing every problem found.
    """
    cfg = defaults()
    errors = []
    section = None
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                errors.append(f"line {lineno}: unknown section [{section}]")
            continue
        key, eq, raw = line.partition("=")
        key = key.strip()
        if not eq:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        if section is None:
            errors.append(f"line {lineno}: key {key!r} outside any section")
            continue
        if section not in SCHEMA:
            continue
        spec = SCHEMA[section].get(key)
        where = f"line {lineno}: {section}.{key}"
        if spec is None:
            errors.append(f"line {lineno}: unknown key {key!r} in [{section}]")
            continue
        if (section, key) in seen:
            errors.append(f"{where}: given more than once")
            continue
        seen.add((section, key))
        value, errs = _parse_value(where, spec, raw)
        errors.extend(errs)
        if not errs:
            cfg.values[section][key] = value
    errors.extend(_cross_checks(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _cross_checks(cfg):
    errors = []
    e = cfg.values["energy"]
    if e["mu_max"] < e["mu_min"]:
        errors.append("energy.mu_max: must not be below mu_min")
    s = cfg.values["scan"]
    if s["lambda_max"] < s["lambda_min"]:
        errors.append("scan.lambda_max: must not be below lambda_min")
    if s["a_max"] < s["a_min"]:
        errors.append("scan.a_max: must not be below a_min")
    sim = cfg.values["simulate"]
    if sim["n_points"] < 8:
        errors.append("simulate.n_points: must be at least 8")
    if sim["n_traj"] < 100:
        errors.append("simulate.n_traj: must be at least 100")
    return errors
