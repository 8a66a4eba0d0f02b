"""Line-oriented scenario configuration.

Syntax::

    # comment
    section.key = value
    [body]                 # opens a new repeatable block
    body.key = value

Single sections are ``scenario``, ``time``, ``solver``, ``newton``,
``adamw``, ``contact``, ``async`` and ``output``; ``[body]``, ``[joint]``
and ``[load]`` blocks may repeat and their keys must use the block's own
prefix.  Every key is checked against :data:`SCHEMA`; unknown keys,
duplicate keys and malformed values raise :class:`ConfigError` with the
offending line number.  :func:`dumps` writes a canonical form such that
``parse(dumps(parse(text))) == parse(text)``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ConfigError

_BOOL = {"true": True, "yes": True, "on": True, "1": True,
         "false": False, "no": False, "off": False, "0": False}


def _as_float(s):
    return float(s)


def _as_int(s):
    return int(s)


def _as_bool(s):
    try:
        return _BOOL[s.lower()]
    except KeyError:
        raise ValueError(f"expected true or false, got '{s}'") from None


def _vec(n, conv=float):
    def parse(s):
        parts = s.replace(",", " ").split()
        if n is not None and len(parts) != n:
            raise ValueError(f"expected {n} numbers, got {len(parts)}")
        if not parts:
            raise ValueError("expected at least one number")
        return tuple(conv(p) for p in parts)
    return parse


def _words(s):
    parts = s.split()
    if not parts:
        raise ValueError("expected at least one word")
    return tuple(parts)


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got '{s}'")
        return s
    return parse


FLOAT, INT, BOOL, STR = _as_float, _as_int, _as_bool, str
VEC3, IVEC3, FLOATS, WORDS = _vec(3), _vec(3, int), _vec(None), _words

SCHEMA: dict[str, dict] = {
    "scenario": {"name": STR, "description": STR},
    "time": {"h": FLOAT, "n_steps": INT, "gravity": VEC3, "gravity_ramp": FLOAT},
    "solver": {"method": _choice("newton", "adamw"), "eps_in": FLOAT, "eps_rel": FLOAT, "eps_out": FLOAT,
               "max_outer": INT, "max_inner": INT, "rho": FLOAT, "ordering": _choice("amd", "rcm", "natural"),
               "viscous_tangent": BOOL},
    "newton": {"line_search": BOOL, "c1": FLOAT, "beta": FLOAT, "j_max": INT,
               "on_failure": _choice("accept_last", "restore")},
    "adamw": {"alpha": FLOAT, "schedule": _choice("constant", "exponential"), "decay": FLOAT,
              "alpha_min": FLOAT, "beta1": FLOAT, "beta2": FLOAT, "eps": FLOAT, "weight_decay": FLOAT,
              "check_interval": INT, "commit_velocity": BOOL, "max_inner": INT},
    "contact": {"enabled": BOOL, "k_n": FLOAT, "k_t": FLOAT, "hertz_E": FLOAT, "hertz_nu": FLOAT,
                "e": FLOAT, "mu_s": FLOAT, "mu_k": FLOAT, "mu_r": FLOAT, "K": INT, "clamp": FLOAT,
                "limit_damping": BOOL, "self_collision": BOOL, "plane_point": VEC3, "plane_normal": VEC3,
                "plane_size": FLOAT},
    "async": {"enabled": BOOL, "n_max": INT},
    "output": {"dir": STR, "vtk_every": INT, "csv": STR, "report": STR, "phases": WORDS},
    "body": {"name": STR, "mesh": STR, "shape": _choice("box", "sphere", "cantilever"), "size": VEC3,
             "divisions": IVEC3, "origin": VEC3, "radius": FLOAT, "n": INT, "center": VEC3, "res": INT,
             "rotate_y": FLOAT, "material": _choice("svk", "mooney_rivlin"), "E": FLOAT, "nu": FLOAT,
             "C10": FLOAT, "C01": FLOAT, "kappa": FLOAT, "density": FLOAT, "mass": FLOAT,
             "eta_damp": FLOAT, "lambda_damp": FLOAT, "velocity": VEC3},
    "joint": {"name": STR, "type": _choice("clamp", "spherical", "revolute"), "body": STR, "parent": STR,
              "select_min": VEC3, "select_max": VEC3, "point": VEC3, "axis": VEC3, "axis_points": _vec(6),
              "transverse_points": _vec(12)},
    "load": {"name": STR, "body": STR, "select_min": VEC3, "select_max": VEC3, "force": VEC3,
             "ramp_time": FLOAT, "hold_until": FLOAT},
}
BLOCKS = ("body", "joint", "load")


@dataclass
class Config:
    """Typed key/value pairs: single sections plus ordered repeatable blocks."""

    sections: dict = field(default_factory=dict)
    blocks: dict = field(default_factory=lambda: {b: [] for b in BLOCKS})
    source: str | None = None

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def set(self, section: str, key: str, value) -> None:
        """Set a single-section key; ``value`` is parsed when given as text."""
        if section not in SCHEMA or section in BLOCKS or key not in SCHEMA[section]:
            raise ConfigError(f"unknown key '{section}.{key}'")
        if isinstance(value, str) and SCHEMA[section][key] is not STR:
            value = _convert(section, key, value, None)
        self.sections.setdefault(section, {})[key] = value

    def __eq__(self, other):
        return isinstance(other, Config) and self.sections == other.sections and self.blocks == other.blocks


def _convert(section, key, raw, line):
    try:
        return SCHEMA[section][key](raw)
    except ValueError as err:
        raise ConfigError(f"bad value for '{section}.{key}': {err}", line) from None


def parse(text: str, source: str | None = None) -> Config:
    cfg = Config(source=source)
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in BLOCKS:
                raise ConfigError(f"unknown block '[{name}]' (expected one of {', '.join(BLOCKS)})", no)
            current = {}
            cfg.blocks[name].append(current)
            current_name = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value', got '{line}'", no)
        lhs, rhs = (s.strip() for s in line.split("=", 1))
        if "." not in lhs:
            raise ConfigError(f"key '{lhs}' lacks a section prefix", no)
        section, key = lhs.split(".", 1)
        if section not in SCHEMA:
            raise ConfigError(f"unknown section '{section}'", no)
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key '{lhs}'", no)
        if not rhs:
            raise ConfigError(f"empty value for '{lhs}'", no)
        value = _convert(section, key, rhs, no)
        if section in BLOCKS:
            if current is None or current_name != section:
                raise ConfigError(f"'{lhs}' must follow a [{section}] line", no)
            target = current
        else:
            target = cfg.sections.setdefault(section, {})
        if key in target:
            raise ConfigError(f"duplicate key '{lhs}'", no)
        target[key] = value
    return cfg


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, tuple):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def dumps(cfg: Config) -> str:
    """Canonical text: sections in schema order, then blocks in file order."""
    out = []
    for section, keys in SCHEMA.items():
        if section in BLOCKS or section not in cfg.sections:
            continue
        for key in keys:
            if key in cfg.sections[section]:
                out.append(f"{section}.{key} = {_fmt(cfg.sections[section][key])}")
    for name in BLOCKS:
        for block in cfg.blocks[name]:
            out.append("")
            out.append(f"[{name}]")
            for key in SCHEMA[name]:
                if key in block:
                    out.append(f"{name}.{key} = {_fmt(block[key])}")
    return "\n".join(out) + "\n"


def load(path) -> Config:
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read(), source=path)


def preset_dir() -> str:
    return os.path.join(os.path.dirname(__file__), "presets")


def preset_names() -> list[str]:
    return sorted(f[:-4] for f in os.listdir(preset_dir()) if f.endswith(".cfg"))


def resolve(name_or_path) -> str:
    """A config path, or the file of a shipped preset given by name."""
    p = os.fspath(name_or_path)
    if os.path.exists(p):
        return p
    cand = os.path.join(preset_dir(), p if p.endswith(".cfg") else p + ".cfg")
    if os.path.exists(cand):
        return cand
    raise FileNotFoundError(f"no config file or preset named '{p}'")


def load_preset(name: str) -> Config:
    return load(resolve(name))


def key_reference() -> str:
    """Human-readable list of every accepted key."""
    lines = []
    for section, keys in SCHEMA.items():
        head = f"[{section}]" if section in BLOCKS else section
        lines.append(f"{head}: " + ", ".join(keys))
    return "\n".join(lines)
