"""Run configuration: a sectioned ``key = value`` text format.

Every key is typed and validated at load time; errors carry the line of the
offending key.  :func:`canonical_text` writes every field in a fixed order
with shortest round-trip floats, so ``load(canonical(cfg)) == cfg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BlowlabError, ConfigError
from .heat_solver import (BOUNDARIES, GEOMETRIES, MIN_INTERIOR, StepPolicy, graded_interval, radial_grid,
                          uniform_interval)
from .nonlinearity import catalog_names, default_params, get_entry

FAMILIES = ("gaussian", "compact", "constant", "zero", "bumps")
SPACINGS = ("uniform", "graded")


@dataclass
class RunConfig:
    # nonlinearity
    name: str = "pure_power"
    p: float = 3.0
    alpha: Optional[float] = None
    params: dict = field(default_factory=dict)
    # domain
    geometry: str = "interval"
    lo: float = -4.0
    hi: float = 4.0
    R: float = 4.0
    n: int = 1
    boundary: str = "dirichlet"
    # grid
    nodes: int = 2049
    spacing: str = "graded"
    lam: float = 1.2
    # initial data
    family: str = "gaussian"
    amplitude: float = 5.0
    width: float = 1.0
    center: float = 0.0
    centers: list = field(default_factory=list)
    amplitudes: list = field(default_factory=list)
    # step policy
    c_dt: float = 0.05
    dt_max: float = 1e-2
    u_stop: float = 1e8
    max_steps: int = 200000
    t_max: float = 50.0
    # analysis
    a_list: list = field(default_factory=list)
    outer_a: list = field(default_factory=list)
    Y_max: float = 8.0
    C_box: float = 1.0
    # output
    out_dir: str = "run"

    def nonlinearity(self):
        return get_entry(self.name, p=self.p, alpha=self.alpha, **self.params)

    def grid(self):
        if self.geometry == "radial_ball":
            lam = self.lam if self.spacing == "graded" else 0.0
            return radial_grid(self.R, self.nodes, self.n, lam=lam, boundary=self.boundary)
        if self.spacing == "graded":
            return graded_interval(self.lo, self.hi, self.nodes, lam=self.lam, boundary=self.boundary)
        return uniform_interval(self.lo, self.hi, self.nodes, boundary=self.boundary)

    def policy(self) -> StepPolicy:
        return StepPolicy(c_dt=self.c_dt, dt_max=self.dt_max, u_stop=self.u_stop, max_steps=self.max_steps,
                          t_max=self.t_max)

    def u0(self):
        """Initial data as a function of the node coordinates."""
        A, w, c = self.amplitude, self.width, self.center
        if self.family == "zero":
            return lambda x: np.zeros_like(x)
        if self.family == "constant":
            return lambda x: np.full_like(x, A)
        if self.family == "gaussian":
            return lambda x: A * np.exp(-(((x - c) / w) ** 2))
        if self.family == "compact":
            return lambda x: A * np.clip(1 - ((x - c) / w) ** 2, 0, None) ** 2
        pairs = list(zip(self.centers, self.amplitudes))
        return lambda x: sum(a * np.exp(-(((x - cc) / w) ** 2)) for cc, a in pairs)


# section -> [(key, attribute, kind)]
_SCHEMA = {
    "nonlinearity": [("name", "name", "str"), ("p", "p", "float"), ("alpha", "alpha", "optfloat")],
    "domain": [("geometry", "geometry", "str"), ("lo", "lo", "float"), ("hi", "hi", "float"),
               ("R", "R", "float"), ("n", "n", "int"), ("boundary", "boundary", "str")],
    "grid": [("nodes", "nodes", "int"), ("spacing", "spacing", "str"), ("lam", "lam", "float")],
    "initial": [("family", "family", "str"), ("amplitude", "amplitude", "float"), ("width", "width", "float"),
                ("center", "center", "float"), ("centers", "centers", "floats"),
                ("amplitudes", "amplitudes", "floats")],
    "policy": [("c_dt", "c_dt", "float"), ("dt_max", "dt_max", "float"), ("u_stop", "u_stop", "float"),
               ("max_steps", "max_steps", "int"), ("t_max", "t_max", "float")],
    "analysis": [("a_list", "a_list", "floats"), ("outer_a", "outer_a", "floats"), ("Y_max", "Y_max", "float"),
                 ("C_box", "C_box", "float")],
    "output": [("dir", "out_dir", "str")],
}


def _convert(kind: str, raw: str, line: int):
    try:
        if kind == "str":
            if not raw:
                raise ValueError("empty value")
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
        elif kind == "optfloat":
            return None if raw.lower() == "none" else float(raw)
        else:
            return [float(x) for x in raw.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot read {raw!r} as {kind}: {exc}", line) from None
    if not math.isfinite(v):
        raise ConfigError(f"value {raw!r} is not finite", line)
    return v


def parse(text: str) -> RunConfig:
    cfg = RunConfig()
    lines = {}
    section = None
    param_lines = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("["):
            if not s.endswith("]"):
                raise ConfigError("malformed section header", no)
            section = s[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"unknown section [{section}]", no)
            continue
        if section is None:
            raise ConfigError("key outside any section", no)
        if "=" not in s:
            raise ConfigError("expected 'key = value'", no)
        key, value = (x.strip() for x in s.split("=", 1))
        if (section, key) in lines or (section == "nonlinearity" and key in param_lines):
            raise ConfigError(f"duplicate key {key!r}", no)
        spec = {k: (attr, kind) for k, attr, kind in _SCHEMA[section]}
        if key in spec:
            attr, kind = spec[key]
            setattr(cfg, attr, _convert(kind, value, no))
            lines[(section, key)] = no
        elif section == "nonlinearity":
            param_lines[key] = (no, value)
        else:
            raise ConfigError(f"unknown key {key!r} in [{section}]", no)
    _resolve_params(cfg, lines, param_lines)
    _validate(cfg, lines)
    return cfg


def _resolve_params(cfg, lines, param_lines):
    where = lines.get(("nonlinearity", "name"), 0)
    if cfg.name not in catalog_names():
        raise ConfigError(f"unknown nonlinearity {cfg.name!r}; known: {', '.join(catalog_names())}", where)
    defaults = default_params(cfg.name)
    params = {}
    for key, (no, value) in param_lines.items():
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} in [nonlinearity] for {cfg.name}", no)
        kind = "int" if isinstance(defaults[key], int) else "float"
        params[key] = _convert(kind, value, no)
        lines[("nonlinearity", key)] = no
    cfg.params = {**defaults, **params}


def _validate(cfg: RunConfig, lines: dict):
    def need(ok, section, key, msg):
        if not ok:
            raise ConfigError(msg, lines.get((section, key), 0))

    need(cfg.p > 1, "nonlinearity", "p", f"exponent p must satisfy p > 1, got {cfg.p!r}")
    need(cfg.alpha is None or cfg.alpha > 0, "nonlinearity", "alpha", "alpha must be positive")
    need(cfg.geometry in GEOMETRIES, "domain", "geometry", f"geometry must be one of {', '.join(GEOMETRIES)}")
    need(cfg.boundary in BOUNDARIES, "domain", "boundary", f"boundary must be one of {', '.join(BOUNDARIES)}")
    need(cfg.n >= 1, "domain", "n", "dimension n must be >= 1")
    if cfg.geometry == "interval":
        need(cfg.n == 1, "domain", "n", "interval geometry requires n = 1")
        need(cfg.lo < cfg.hi, "domain", "hi", "need lo < hi")
    else:
        need(cfg.R > 0, "domain", "R", "ball radius R must be positive")
        need(cfg.boundary != "periodic", "domain", "boundary", "periodic boundary needs an interval")
    need(cfg.nodes >= MIN_INTERIOR + 2, "grid", "nodes", f"need at least {MIN_INTERIOR + 2} nodes")
    need(cfg.spacing in SPACINGS, "grid", "spacing", f"spacing must be one of {', '.join(SPACINGS)}")
    need(cfg.lam >= 0, "grid", "lam", "lam must be >= 0")
    need(cfg.family in FAMILIES, "initial", "family", f"family must be one of {', '.join(FAMILIES)}")
    need(cfg.amplitude >= 0, "initial", "amplitude", "amplitude must be >= 0")
    need(cfg.width > 0, "initial", "width", "width must be positive")
    if cfg.family == "bumps":
        need(len(cfg.centers) > 0, "initial", "centers", "bumps need at least one center")
        need(len(cfg.centers) == len(cfg.amplitudes), "initial", "amplitudes",
             "centers and amplitudes must have the same length")
        need(all(a >= 0 for a in cfg.amplitudes), "initial", "amplitudes", "amplitudes must be >= 0")
    need(0 < cfg.c_dt <= 1, "policy", "c_dt", "c_dt must lie in (0, 1]")
    need(cfg.dt_max > 0, "policy", "dt_max", "dt_max must be positive")
    need(cfg.u_stop > 1, "policy", "u_stop", "u_stop must exceed 1")
    need(cfg.max_steps >= 1, "policy", "max_steps", "max_steps must be >= 1")
    need(cfg.t_max > 0, "policy", "t_max", "t_max must be positive")
    need(cfg.Y_max > 0, "analysis", "Y_max", "Y_max must be positive")
    need(0 < cfg.C_box <= cfg.Y_max, "analysis", "C_box", "C_box must lie in (0, Y_max]")
    try:
        cfg.nonlinearity()
    except BlowlabError as exc:
        raise ConfigError(str(exc), lines.get(("nonlinearity", "name"), 0)) from None
    try:
        cfg.grid()
    except BlowlabError as exc:
        raise ConfigError(f"grid: {exc}", lines.get(("grid", "nodes"), 0)) from None


def _format(kind: str, value) -> str:
    if kind == "optfloat" and value is None:
        return "none"
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind in ("float", "optfloat"):
        return repr(float(value))
    return str(value)


def canonical_text(cfg: RunConfig) -> str:
    out = []
    for section, keys in _SCHEMA.items():
        out.append(f"[{section}]")
        for key, attr, kind in keys:
            out.append(f"{key} = {_format(kind, getattr(cfg, attr))}")
        if section == "nonlinearity":
            for key, value in sorted(cfg.params.items()):
                out.append(f"{key} = {value if isinstance(value, int) else repr(float(value))}")
        out.append("")
    return "\n".join(out)


def load(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
