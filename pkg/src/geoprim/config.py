"""Pipeline tunables and their flat ``key = value`` file format."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    # edge map
    t_low: float = 0.1
    t_high: float = 0.2
    sigma: float = 1.0
    equalize: bool = True
    # contours and polylines
    min_contour_length: int = 5
    rdp_tol: float = 2.0
    theta0: float = 90.0  # degrees
    # stage 1
    p: int = 3
    S: int = 200
    bin: int = 10
    margin: int = 0
    d: int = 5
    D: int = 2
    eps_b: float = 0.5
    tol_conv: float = 2.0
    region_mode: str = "longest"
    single_edge: str = "fallback"
    # stage 2
    sim_tols: float = 0.1
    d0: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.t_low < self.t_high <= 1:
            raise ConfigError("need 0 <= t_low < t_high <= 1")
        positive = ("sigma", "rdp_tol", "theta0", "p", "S", "bin", "d", "D", "eps_b",
                    "tol_conv", "sim_tols", "d0", "min_contour_length")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.d % 2 == 0:
            raise ConfigError("d must be odd")
        if self.margin < 0 or self.seed < 0:
            raise ConfigError("margin and seed must be non-negative")
        if self.theta0 > 180:
            raise ConfigError("theta0 is in degrees and must be <= 180")
        if self.region_mode not in ("longest", "all"):
            raise ConfigError("region_mode must be 'longest' or 'all'")
        if self.single_edge not in ("fallback", "empty"):
            raise ConfigError("single_edge must be 'fallback' or 'empty'")

    @property
    def theta0_rad(self) -> float:
        return math.radians(self.theta0)

    def updated(self, **changes) -> "PipelineConfig":
        unknown = set(changes) - field_names()
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return replace(self, **changes)

    def dumps(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in asdict(self).items())

    def dump(self, path) -> None:
        Path(path).write_text(self.dumps())


def field_names() -> set[str]:
    return {f.name for f in fields(PipelineConfig)}


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def parse_value(name: str, text: str):
    """Convert a string to the type of config field ``name``."""
    kind = {f.name: f.type for f in fields(PipelineConfig)}.get(name)
    if kind is None:
        raise ConfigError(f"unknown config key: {name}")
    text = text.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = parse_value(key, val)
    return values


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    base = base or PipelineConfig()
    return base.updated(**parse_config_text(Path(path).read_text()))
