"""Run configuration: flat ``key = value`` files, presets and validation."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

SUPPORTED_DEGREES = (1, 2)
START_MODES = ("first_order", "taylor2", "exact")
SOLVERS = ("iterative", "direct", "dense")


class ConfigError(ValueError):
    pass


@dataclass
class SimulationConfig:
    M: int = 8
    degree: int = 1
    dt: float = 0.0025
    T: float = 0.5
    start: str = "first_order"
    gamma: float = 1.0
    V0: float = 0.0
    charge_source: bool = False
    charge_every: int = 10
    problem: str = "example51"
    rtol: float = 1e-10
    max_iter_factor: float = 10.0
    method: str = "iterative"
    csv_path: str = ""
    vtk_every: int = 0
    vtk_dir: str = ""
    line_samples: int = 101
    sample_every: int = 0
    samples_path: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if isinstance(self.M, bool) or int(self.M) != self.M or self.M < 1:
            raise ConfigError(f"mesh.M must be a positive integer, got {self.M!r}")
        if self.degree not in SUPPORTED_DEGREES:
            raise ConfigError(f"fe.degree={self.degree} is not supported; supported degrees are 1 and 2")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"time.dt must be positive, got {self.dt}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"time.T must be positive, got {self.T}")
        if self.gamma <= 0:
            raise ConfigError(f"physics.gamma must be positive, got {self.gamma}")
        if self.start not in START_MODES:
            raise ConfigError(f"time.start must be one of {START_MODES}, got {self.start!r}")
        if self.method not in SOLVERS:
            raise ConfigError(f"solver.method must be one of {SOLVERS}, got {self.method!r}")
        if self.charge_every < 1:
            raise ConfigError("physics.charge_every must be >= 1")
        if not self.rtol > 0:
            raise ConfigError("solver.rtol must be positive")

    @property
    def n_steps(self) -> int:
        """Steps so the last one lands on T; dt is rounded down to T / n."""
        ratio = self.T / self.dt
        n = round(ratio)
        if abs(ratio - n) > 1e-9 * max(1.0, ratio):
            n = math.ceil(ratio)
        return max(int(n), 1)

    @property
    def dt_effective(self) -> float:
        return self.T / self.n_steps

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{key} = {_format(getattr(self, attr))}\n" for key, attr in KEYS.items())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


# Dotted file keys -> dataclass attributes.
KEYS = {
    "problem": "problem",
    "mesh.M": "M",
    "fe.degree": "degree",
    "time.dt": "dt",
    "time.T": "T",
    "time.start": "start",
    "physics.gamma": "gamma",
    "physics.V0": "V0",
    "physics.charge_source": "charge_source",
    "physics.charge_every": "charge_every",
    "solver.rtol": "rtol",
    "solver.max_iter_factor": "max_iter_factor",
    "solver.method": "method",
    "output.csv_path": "csv_path",
    "output.vtk_every": "vtk_every",
    "output.vtk_dir": "vtk_dir",
    "output.line_samples": "line_samples",
    "output.sample_every": "sample_every",
    "output.samples_path": "samples_path",
}

_TYPES = {f.name: f.type for f in fields(SimulationConfig)}

PRESETS = {
    "example51": dict(problem="example51", T=0.5, dt=0.0025, V0=0.0, gamma=1.0, charge_source=True, M=8, degree=1,
                      vtk_every=100, sample_every=20),
    "example52": dict(problem="example52", T=4.0, dt=0.125, V0=5.0, gamma=1.0, M=8, degree=2, start="exact"),
    "example53": dict(problem="example53", T=10.0, dt=0.0025, V0=0.0, gamma=1.0, M=8, degree=1,
                      vtk_every=400, sample_every=40),
}


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(attr: str, raw: str):
    kind = _TYPES[attr]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            value = float(raw)
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {kind} for {attr}") from None
    return raw


def parse_overrides(pairs) -> dict:
    """Parse ``key=value`` strings (or (key, value) pairs) into attribute updates."""
    out = {}
    for item in pairs:
        key, value = item.split("=", 1) if isinstance(item, str) else item
        key = key.strip()
        if key not in KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        out[KEYS[key]] = _convert(KEYS[key], str(value))
    return out


def parse_text(text: str) -> dict:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        pairs.append(line)
    return parse_overrides(pairs)


def load_config(path=None, preset: str | None = None, overrides=()) -> SimulationConfig:
    """Preset defaults, then file values, then command-line overrides."""
    values: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(PRESETS)}")
        values.update(PRESETS[preset])
    if path is not None:
        file_values = parse_text(Path(path).read_text())
        if preset is None and "problem" in file_values and file_values["problem"] in PRESETS:
            values.update(PRESETS[file_values["problem"]])
        values.update(file_values)
    values.update(parse_overrides(overrides))
    return SimulationConfig(**values)


def preset(name: str, **changes) -> SimulationConfig:
    return load_config(preset=name).replace(**changes)
