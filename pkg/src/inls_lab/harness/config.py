"""Flat ``section.key = value`` run configuration."""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field, fields, replace

SECTIONS = ("params", "datum", "grid", "schedule", "output")
REQUIRED = {
    "params.d", "params.alpha", "params.beta", "params.lambda",
    "grid.kind", "grid.points",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ParamsBlock:
    d: int = 1
    alpha: float = 1.0
    beta: float = 0.0
    lam: float = 0.0
    regime: str = "long_range"
    # n >= 3 means: params describe the inverse-square problem on R^n
    potential_dim: int = 0


@dataclass(frozen=True)
class DatumBlock:
    family: str = "x_gauss"
    amplitude: float | str = "auto"
    support_scale: float = 1.0
    theta: float | None = None
    delta: float | None = None
    smallness: float = 0.3


@dataclass(frozen=True)
class GridBlock:
    kind: str = "line1d"
    extent: float | str = "auto"
    points: int = 1024


@dataclass(frozen=True)
class ScheduleBlock:
    T_max: float = 1e6
    t_end: float = 10.0
    t_fit_max: float = 1e3
    checkpoints_per_decade: int = 8
    steps_per_decade: int = 256
    method: str = "backward"
    picard_iterations: int = 3
    quad_per_decade: int = 64
    dt: float = 1e-4
    discriminator_tol: float = 0.01


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "runs"
    record_file: str = "records.jsonl"


@dataclass(frozen=True)
class RunConfig:
    params: ParamsBlock = field(default_factory=ParamsBlock)
    datum: DatumBlock = field(default_factory=DatumBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    schedule: ScheduleBlock = field(default_factory=ScheduleBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    def get(self, key: str):
        section, name = _split(key)
        return getattr(getattr(self, section), _attr(name))

    def with_value(self, key: str, raw) -> "RunConfig":
        """Copy with one key replaced; ``raw`` may be text or a typed value."""
        section, name = _split(key)
        block = getattr(self, section)
        ftype = _field_types(type(block))[_attr(name)]
        value = _coerce(key, raw, ftype) if isinstance(raw, str) else _check(key, raw, ftype)
        return replace(self, **{section: replace(block, **{_attr(name): value})})


_CHOICES = {
    "params.regime": ("long_range", "short_range", "auto"),
    "datum.family": ("x_gauss", "r_gauss", "r2_gauss", "gauss", "bump"),
    "grid.kind": ("line1d", "radial2d", "radial3d"),
    "schedule.method": ("backward", "picard"),
}
_ALIASES = {"lambda": "lam"}


def _attr(name):
    return _ALIASES.get(name, name)


def _key_name(attr):
    return {v: k for k, v in _ALIASES.items()}.get(attr, attr)


def _field_types(cls):
    return {f.name: f.type for f in fields(cls)}


def _split(key):
    parts = key.split(".")
    if len(parts) != 2 or parts[0] not in SECTIONS:
        raise ConfigError(f"unknown key {key!r}")
    block = RunConfig.__dataclass_fields__[parts[0]].default_factory
    if _attr(parts[1]) not in _field_types(block):
        raise ConfigError(f"unknown key {key!r}")
    return parts[0], parts[1]


_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _parse_float(key, text):
    if _NUMBER.match(text):
        return float(text)
    m = re.match(r"^([^/\s]+)\s*/\s*([^/\s]+)$", text)
    if m and _NUMBER.match(m[1]) and _NUMBER.match(m[2]):
        return float(m[1]) / float(m[2])
    if text in ("inf", "+inf"):
        return math.inf
    raise ConfigError(f"{key}: expected a number, got {text!r}")


def _coerce(key, text, ftype):
    text = text.strip()
    quoted = len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'"
    bare = text[1:-1] if quoted else text
    if ftype == "int":
        if quoted or not re.match(r"^[+-]?\d+$", text):
            raise ConfigError(f"{key}: expected an integer, got {text!r}")
        value = int(text)
    elif ftype == "float":
        if quoted:
            raise ConfigError(f"{key}: expected a number, got {text!r}")
        value = _parse_float(key, text)
    elif ftype == "float | None":
        if quoted:
            raise ConfigError(f"{key}: expected a number, got {text!r}")
        value = None if text == "none" else _parse_float(key, text)
    elif ftype == "float | str":
        value = bare if quoted or not _NUMBER.match(text) else float(text)
        if isinstance(value, str) and value != "auto":
            raise ConfigError(f"{key}: expected a number or auto, got {text!r}")
    else:
        value = bare
    return _check(key, value, ftype)


def _check(key, value, ftype):
    if ftype == "int" and not (isinstance(value, int) and not isinstance(value, bool)):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if ftype == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        value = float(value)
    if ftype == "str" and not isinstance(value, str):
        raise ConfigError(f"{key}: expected text, got {value!r}")
    if key in _CHOICES and value not in _CHOICES[key]:
        raise ConfigError(f"{key}: {value!r} not one of {', '.join(_CHOICES[key])}")
    return value


def parse_config(text: str) -> RunConfig:
    values: dict = {s: {} for s in SECTIONS}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        section, name = _split(key)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}")
        seen.add(key)
        block = RunConfig.__dataclass_fields__[section].default_factory
        values[section][_attr(name)] = _coerce(key, val, _field_types(block)[_attr(name)])
    missing = sorted(REQUIRED - seen)
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    blocks = {}
    for section in SECTIONS:
        cls = RunConfig.__dataclass_fields__[section].default_factory
        blocks[section] = cls(**values[section])
    return RunConfig(**blocks)


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str) and value != "auto" and not re.match(r"^[A-Za-z_][\w./-]*$", value):
        return f'"{value}"'
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for section in SECTIONS:
        block = getattr(cfg, section)
        for f in fields(block):
            lines.append(f"{section}.{_key_name(f.name)} = {_format(getattr(block, f.name))}")
        lines.append("")
    return "\n".join(lines)


def config_hash(cfg: RunConfig) -> str:
    # the output block only decides where results go, not what they are
    text = "\n".join(l for l in serialize_config(cfg).splitlines() if not l.startswith("output."))
    return hashlib.sha256(text.encode()).hexdigest()


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
