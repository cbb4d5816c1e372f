"""Line-oriented run configuration: ``section.key = value``, ``#`` starts a comment.

Analytic fields are written as a kind followed by ``name=value`` pairs, for
example ``physics.initial = gaussian h0=1 amp=0.1 x0=0.5 y0=0.5 sigma=0.1``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .core import Bathymetry, ConfigError, ConservedState, GridSpec, TargetField

# kind -> allowed parameters with defaults
SCALAR_KINDS = {
    "constant": {"value": 0.0},
    "ramp": {"value": 0.0, "sx": 0.0, "sy": 0.0},
    "gaussian": {"base": 0.0, "amp": 0.0, "x0": 0.5, "y0": 0.5, "sigma": 0.1},
}
STATE_KINDS = {
    "constant": {"h": 1.0, "q1": 0.0, "q2": 0.0},
    "ramp": {"h": 1.0, "sx": 0.0, "sy": 0.0, "q1": 0.0, "q2": 0.0},
    "gaussian": {"h0": 1.0, "amp": 0.1, "x0": 0.5, "y0": 0.5, "sigma": 0.1, "q1": 0.0, "q2": 0.0},
    "lake_at_rest": {"level": 1.0},
}


@dataclass(frozen=True)
class FieldSpec:
    kind: str
    params: tuple = ()  # sorted (name, value) pairs

    def get(self, name: str, table: dict) -> float:
        return dict(self.params).get(name, table[self.kind][name])

    def __str__(self) -> str:
        return " ".join([self.kind] + [f"{k}={v!r}" for k, v in self.params])


def parse_field(text: str, kinds: dict, where: str) -> FieldSpec:
    parts = text.split()
    if not parts:
        raise ConfigError(f"{where}: empty field description")
    kind, rest = parts[0], parts[1:]
    if kind not in kinds:
        raise ConfigError(f"{where}: unknown field kind {kind!r} (expected one of {sorted(kinds)})")
    params = {}
    for item in rest:
        name, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"{where}: expected name=value, got {item!r}")
        if name not in kinds[kind]:
            raise ConfigError(f"{where}: unknown parameter {name!r} for {kind}")
        if name in params:
            raise ConfigError(f"{where}: parameter {name!r} given twice")
        try:
            params[name] = float(val)
        except ValueError:
            raise ConfigError(f"{where}: {name} is not a number: {val!r}") from None
    return FieldSpec(kind, tuple(sorted(params.items())))


def scalar_field(spec: FieldSpec, grid: GridSpec) -> np.ndarray:
    x, y = grid.centers()
    p = lambda n: spec.get(n, SCALAR_KINDS)  # noqa: E731
    if spec.kind == "constant":
        return np.full(grid.shape, p("value"))
    if spec.kind == "ramp":
        return p("value") + p("sx") * x + p("sy") * y
    r2 = (x - p("x0")) ** 2 + (y - p("y0")) ** 2
    return p("base") + p("amp") * np.exp(-r2 / (2 * p("sigma") ** 2))


def state_field(spec: FieldSpec, grid: GridSpec, psi: np.ndarray) -> ConservedState:
    x, y = grid.centers()
    p = lambda n: spec.get(n, STATE_KINDS)  # noqa: E731
    zero = np.zeros(grid.shape)
    if spec.kind == "lake_at_rest":
        return ConservedState(p("level") - psi, zero, zero.copy())
    if spec.kind == "constant":
        h = np.full(grid.shape, p("h"))
    elif spec.kind == "ramp":
        h = p("h") + p("sx") * x + p("sy") * y
    else:
        r2 = (x - p("x0")) ** 2 + (y - p("y0")) ** 2
        h = p("h0") + p("amp") * np.exp(-r2 / (2 * p("sigma") ** 2))
    return ConservedState(h, zero + p("q1"), zero + p("q2"))


@dataclass(frozen=True)
class GridBlock:
    nx: int = 32
    ny: int = 32
    dx: float = 1 / 32
    dy: float = 1 / 32
    t_end: float = 0.1
    dt_hint: float = 0.01
    g: float = 9.81
    cfl: float = 0.5


@dataclass(frozen=True)
class PhysicsBlock:
    alpha1: float = 0.0
    alpha2: float = 0.0
    bathymetry: FieldSpec = FieldSpec("constant")
    initial: FieldSpec = FieldSpec("constant")
    target: FieldSpec = FieldSpec("constant")


@dataclass(frozen=True)
class TDBlock:
    points: tuple = ()  # ((x, y), ...); empty means a sweep
    stride: int = 1
    omega_radius: float = 1.0
    adjoint_mode: str = "continuous"


@dataclass(frozen=True)
class OutputBlock:
    dir: str = "out"
    storage: int = 1
    formats: str = "txt"


@dataclass(frozen=True)
class ValidateBlock:
    seed: int = 0
    eps_cells: tuple = (6.0, 4.0, 3.0)
    fd_points: tuple = ()
    inject_fault: str = "none"


@dataclass(frozen=True)
class RunConfig:
    grid: GridBlock = field(default_factory=GridBlock)
    physics: PhysicsBlock = field(default_factory=PhysicsBlock)
    td: TDBlock = field(default_factory=TDBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    validate: ValidateBlock = field(default_factory=ValidateBlock)


SECTIONS = {f.name: f.default_factory for f in dataclasses.fields(RunConfig)}


def _parse_points(text: str, where: str) -> tuple:
    pts = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        vals = chunk.replace(",", " ").split()
        if len(vals) != 2:
            raise ConfigError(f"{where}: points are 'x y' pairs separated by ';'")
        try:
            pts.append((float(vals[0]), float(vals[1])))
        except ValueError:
            raise ConfigError(f"{where}: bad point {chunk!r}") from None
    return tuple(pts)


def _convert(section: str, key: str, raw: str, where: str):
    name = f"{section}.{key}"
    if section == "physics" and key == "bathymetry":
        return parse_field(raw, SCALAR_KINDS, where)
    if section == "physics" and key in ("initial", "target"):
        return parse_field(raw, STATE_KINDS, where)
    if key in ("points", "fd_points"):
        return _parse_points(raw, where)
    if key == "eps_cells":
        try:
            return tuple(float(v) for v in raw.split())
        except ValueError:
            raise ConfigError(f"{where}: {name} must be numbers") from None
    default = getattr(SECTIONS[section](), key)
    if isinstance(default, str):
        return raw
    try:
        if isinstance(default, int):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: {name} expects a {type(default).__name__}, got {raw!r}") from None


def parse_config(text: str) -> RunConfig:
    seen: dict[str, int] = {}
    values: dict[str, dict] = {s: {} for s in SECTIONS}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        lhs, sep, rhs = line.partition("=")
        if not sep:
            raise ConfigError(f"{where}: expected 'section.key = value'")
        lhs, rhs = lhs.strip(), rhs.strip()
        section, dot, key = lhs.partition(".")
        if not dot or section not in SECTIONS:
            raise ConfigError(f"{where}: unknown section in {lhs!r}")
        if key not in {f.name for f in dataclasses.fields(SECTIONS[section]())}:
            raise ConfigError(f"{where}: unknown key {lhs!r}")
        if lhs in seen:
            raise ConfigError(f"line {lineno}: duplicate key {lhs!r} (first set on line {seen[lhs]})")
        seen[lhs] = lineno
        values[section][key] = _convert(section, key, rhs, where)
    cfg = RunConfig(**{s: SECTIONS[s](**values[s]) for s in SECTIONS})
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    g = cfg.grid
    for name in ("nx", "ny"):
        if getattr(g, name) < 3:
            raise ConfigError(f"grid.{name} must be at least 3, got {getattr(g, name)}")
    for name in ("dx", "dy", "dt_hint", "g"):
        if not getattr(g, name) > 0:
            raise ConfigError(f"grid.{name} must be positive, got {getattr(g, name)}")
    if g.t_end < 0:
        raise ConfigError(f"grid.t_end must be non-negative, got {g.t_end}")
    if not 0 < g.cfl <= 1:
        raise ConfigError(f"grid.cfl must lie in (0, 1], got {g.cfl}")
    for name in ("alpha1", "alpha2"):
        if getattr(cfg.physics, name) < 0:
            raise ConfigError(f"physics.{name} must be non-negative")
    if cfg.td.stride < 1:
        raise ConfigError("td.stride must be at least 1")
    if not cfg.td.omega_radius > 0:
        raise ConfigError("td.omega_radius must be positive")
    if cfg.td.adjoint_mode not in ("continuous", "discrete"):
        raise ConfigError(f"td.adjoint_mode must be continuous or discrete, got {cfg.td.adjoint_mode!r}")
    if cfg.output.storage < 1:
        raise ConfigError("output.storage must be at least 1")
    if cfg.output.formats != "txt":
        raise ConfigError(f"output.formats: only 'txt' is supported, got {cfg.output.formats!r}")
    eps = cfg.validate.eps_cells
    if len(eps) < 3 or any(b >= a for a, b in zip(eps, eps[1:])) or eps[-1] <= 0:
        raise ConfigError("validate.eps_cells must be at least 3 strictly decreasing positive values")
    if cfg.validate.inject_fault not in ("none", "adjoint"):
        raise ConfigError(f"validate.inject_fault must be none or adjoint, got {cfg.validate.inject_fault!r}")


def _format_value(v) -> str:
    if isinstance(v, FieldSpec):
        return str(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(f"{a!r} {b!r}" for a, b in v)
        return " ".join(repr(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for section in SECTIONS:
        block = getattr(cfg, section)
        for f in dataclasses.fields(block):
            text = _format_value(getattr(block, f.name))
            if text:
                lines.append(f"{section}.{f.name} = {text}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Scene:
    """Arrays built from a config; the grid step still has to be chosen."""

    init: ConservedState
    bathy: Bathymetry
    target: TargetField


def build_scene(cfg: RunConfig, grid: GridSpec) -> Scene:
    psi = scalar_field(cfg.physics.bathymetry, grid)
    init = state_field(cfg.physics.initial, grid, psi)
    target = TargetField.from_state(state_field(cfg.physics.target, grid, psi))
    return Scene(init, Bathymetry.from_field(psi, grid), target)
