"""
Per-run experiment configuration.

One JSON document per run is loaded into the dataclass of its command;
command-line flags are applied on top. Every record round-trips through
``as_dict`` so the report can echo exactly what ran.
"""

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import config
from errors import ConfigError

logger = logging.getLogger("experiment_cli")

SPACES = ("disk", "h2c", "euclidean1", "euclidean2")
STRATEGIES = ("synchronous", "independent", "mirror")
ESTIMATES = ("survival", "exit_event", "absorption")
SUITES = ("disk_schwarz", "caratheodory", "h2c_prop72", "comparison_1d", "psd_probe",
          "martingale", "dominance", "integrator", "matrix")
FORMATS = ("csv", "json")


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


@dataclass
class ProfileConfig:
    family: str = "kahler"
    n: int = 1
    k1: float = -0.25
    k2: float = -0.25
    m: float = 0.0

    def validate(self):
        _require(self.family in ("kahler", "quaternionic"), f"unknown curvature family {self.family!r}")
        _require(isinstance(self.n, int) and self.n >= 1, f"n must be a positive integer, got {self.n}")
        _require(self.m >= 0, f"m must be nonnegative, got {self.m}")


@dataclass
class BoundsConfig:
    profiles: List[ProfileConfig] = field(default_factory=lambda: [ProfileConfig()])
    rhos: List[float] = field(default_factory=lambda: [0.1, 1.0])
    sup_norm: float = 1.0
    delta: float = 0.5
    exit_constant: Optional[float] = None  # constant c of the exit-event bound; the row is skipped when unset
    wang_times: List[float] = field(default_factory=lambda: [1.0, math.inf])
    ricci_sweep: bool = True

    def validate(self):
        _require(len(self.profiles) > 0, "at least one profile is needed")
        for profile in self.profiles:
            profile.validate()
        _require(all(r >= 0 for r in self.rhos), "rho values must be nonnegative")
        _require(self.sup_norm >= 0, "sup_norm must be nonnegative")
        _require(self.delta > 0, "delta must be positive")
        _require(all(t > 0 for t in self.wang_times), "wang_times must be positive")


@dataclass
class SimulateConfig:
    space: str = "disk"
    strategy: str = "mirror"
    estimate: str = "survival"
    x0: List[float] = field(default_factory=lambda: [0.3, 0.0])
    y0: List[float] = field(default_factory=lambda: [-0.3, 0.0])
    dt: Optional[float] = None
    t_max: float = 2.0
    eps_couple: Optional[float] = None
    n_paths: int = 4096
    t_grid: List[float] = field(default_factory=lambda: [0.0, 0.5, 1.0, 1.5, 2.0])
    # exit_event
    center: Optional[List[float]] = None
    delta: float = 0.5
    # absorption: dr = sqrt(sigma2) dW + b dt from r0
    b: float = 1.0
    sigma2: float = 2.0
    r0: float = 0.5

    def validate(self):
        _require(self.space in SPACES, f"unknown space {self.space!r}; choose from {SPACES}")
        _require(self.strategy in STRATEGIES, f"unknown strategy {self.strategy!r}")
        _require(self.estimate in ESTIMATES, f"unknown estimate {self.estimate!r}; choose from {ESTIMATES}")
        _require(isinstance(self.n_paths, int) and self.n_paths > 0,
                 f"n_paths must be a positive integer, got {self.n_paths}")
        _require(self.t_max > 0, f"t_max must be positive, got {self.t_max}")
        _require(self.dt is None or 0 < self.dt <= self.t_max, f"dt must lie in (0, t_max], got {self.dt}")
        _require(self.eps_couple is None or self.eps_couple > 0, "eps_couple must be positive")
        _require(len(self.t_grid) > 0, "t_grid must not be empty")
        _require(all(0 <= t <= self.t_max for t in self.t_grid), "t_grid must lie within [0, t_max]")
        _require(list(self.t_grid) == sorted(self.t_grid), "t_grid must be increasing")
        if self.estimate == "exit_event":
            _require(self.delta > 0, "delta must be positive")
        if self.estimate == "absorption":
            _require(self.sigma2 > 0, "sigma2 must be positive")
            _require(self.r0 >= 0, "r0 must be nonnegative")

    @property
    def step(self) -> float:
        if self.dt is not None:
            return self.dt
        return config.DT_H2C if self.space == "h2c" else config.DT_DISK


@dataclass
class VerifyConfig:
    suite: str = "comparison_1d"
    # multiplies every path count of the suite; 1.0 is the acceptance scale
    scale: float = 1.0
    # h2c_prop72 start points
    x0: List[float] = field(default_factory=lambda: [0.3, 0.0, 0.0, 0.0])
    y0: List[float] = field(default_factory=lambda: [-0.3, 0.0, 0.0, 0.0])

    def validate(self):
        _require(self.suite in SUITES, f"unknown suite {self.suite!r}; choose from {SUITES}")
        _require(self.scale > 0, f"scale must be positive, got {self.scale}")
        _require(len(self.x0) == 4 and len(self.y0) == 4, "h2c start points need four coordinates")

    def paths(self, acceptance_count: int) -> int:
        return max(2, int(round(acceptance_count * self.scale)))


@dataclass
class CaratheodoryConfig:
    space: str = "disk"
    strategy: str = "mirror"
    x: List[float] = field(default_factory=lambda: [0.5, 0.0])
    y: List[float] = field(default_factory=lambda: [0.0, 0.0])
    t: float = 1.0
    dt: Optional[float] = None
    eps_couple: Optional[float] = None
    n_paths: int = 4096
    phases: int = 8

    def validate(self):
        _require(self.space in ("disk", "h2c"), f"caratheodory runs on disk or h2c, got {self.space!r}")
        _require(self.strategy in STRATEGIES, f"unknown strategy {self.strategy!r}")
        _require(isinstance(self.n_paths, int) and self.n_paths > 0,
                 f"n_paths must be a positive integer, got {self.n_paths}")
        _require(self.t > 0, f"t must be positive, got {self.t}")
        _require(self.phases >= 1, "phases must be at least 1")
        _require(self.dt is None or 0 < self.dt <= self.t, f"dt must lie in (0, t], got {self.dt}")


@dataclass
class WilsonConfig:
    k: int = 0
    n: int = 100
    z: float = config.WILSON_Z

    def validate(self):
        _require(isinstance(self.n, int) and self.n > 0, f"n must be a positive integer, got {self.n}")
        _require(isinstance(self.k, int) and 0 <= self.k <= self.n, f"k must lie in [0, n], got {self.k}")
        _require(self.z > 0, f"z must be positive, got {self.z}")


COMMAND_CONFIGS = {
    "bounds": BoundsConfig,
    "simulate": SimulateConfig,
    "verify": VerifyConfig,
    "caratheodory": CaratheodoryConfig,
    "wilson": WilsonConfig,
}


def _build(cls, data: Dict[str, Any]):
    """Instantiate a config dataclass from a dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{cls.__name__} expects an object, got {type(data).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} fields: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        if name == "profiles":
            value = [_build(ProfileConfig, item) for item in value]
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_config(command: str, path: Optional[Path] = None,
                overrides: Optional[Dict[str, Any]] = None):
    """Config record for ``command`` from an optional JSON file plus flag overrides."""
    if command not in COMMAND_CONFIGS:
        raise ConfigError(f"unknown command {command!r}")
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
        logger.info(f"Loaded {command} config from {path}")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    record = _build(COMMAND_CONFIGS[command], data)
    try:
        record.validate()
    except TypeError as e:
        # mistyped JSON values surface here as comparisons between str and float
        raise ConfigError(f"invalid {command} config: {e}") from e
    return record


def as_dict(record) -> Dict[str, Any]:
    return dataclasses.asdict(record)
