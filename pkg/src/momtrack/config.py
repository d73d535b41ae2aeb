"""Run configuration: dataclasses, YAML loading, and the generated reference doc."""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .algorithms import AlgorithmSpec, InitMode, Variant
from .exceptions import ConfigError
from .rng import RandomStream
from .topology import TopologyKind, WeightScheme, build_topology

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TopologyConfig:
    kind: TopologyKind = TopologyKind.RING
    n: int = 25
    scheme: WeightScheme = WeightScheme.UNIFORM

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", TopologyKind(self.kind))
        except ValueError:
            choices = ", ".join(k.value for k in TopologyKind)
            raise ConfigError(f"topology.kind: unknown topology {self.kind!r} (choose from {choices})") from None
        try:
            object.__setattr__(self, "scheme", WeightScheme(self.scheme))
        except ValueError:
            raise ConfigError(f"topology.scheme: unknown weight scheme {self.scheme!r} (choose metropolis or uniform)") from None
        _require_int("topology.n", self.n, minimum=1)
        build_topology(self.kind, self.n)  # size constraints


@dataclass(frozen=True)
class ProblemConfig:
    d: int = 50
    zeta2: float = 0.0
    sigma2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        _require_int("problem.d", self.d, minimum=1)
        _require_int("problem.seed", self.seed, minimum=0)
        for name in ("zeta2", "sigma2"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v < 0:
                raise ConfigError(f"problem.{name} must be a finite number >= 0, got {v!r}")
            object.__setattr__(self, name, float(v))


@dataclass(frozen=True)
class X0Config:
    """Common starting point of every node.

    ``zeros``: the origin. ``vector``: the given ``values``. ``sphere``: a
    point drawn uniformly on the sphere of ``radius`` using ``seed``.
    """

    kind: str = "zeros"
    values: tuple | None = None
    radius: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("zeros", "vector", "sphere"):
            raise ConfigError(f"x0.kind: must be zeros, vector or sphere, got {self.kind!r}")
        if self.kind == "vector":
            if self.values is None:
                raise ConfigError("x0.values: required when x0.kind is vector")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not (self.radius >= 0 and math.isfinite(self.radius)):
            raise ConfigError(f"x0.radius must be a finite number >= 0, got {self.radius!r}")

    def resolve(self, d: int) -> np.ndarray:
        if self.kind == "zeros":
            return np.zeros(d)
        if self.kind == "vector":
            if len(self.values) != d:
                raise ConfigError(f"x0.values: expected {d} entries, got {len(self.values)}")
            return np.array(self.values, dtype=float)
        z = RandomStream(self.seed).normal("x0-sphere", 0, [0], d)[0]
        return self.radius * z / np.linalg.norm(z)


@dataclass(frozen=True)
class RunConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    algorithm: AlgorithmSpec = field(default_factory=AlgorithmSpec)
    rounds: int = 20_000
    seed: int = 0
    cadence: int = 1
    x0: X0Config = field(default_factory=X0Config)
    window: float = 0.1
    workers: int | None = None

    def __post_init__(self):
        _require_int("rounds", self.rounds, minimum=1)
        _require_int("seed", self.seed, minimum=0)
        _require_int("cadence", self.cadence, minimum=1)
        if not (0.0 < self.window <= 1.0):
            raise ConfigError(f"window must be in (0, 1], got {self.window!r}")
        if self.workers is not None:
            _require_int("workers", self.workers, minimum=1)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, **_plain(dataclasses.asdict(self))}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping at the top level")
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: unsupported version {version!r}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        kwargs = {}
        sections = {"topology": TopologyConfig, "problem": ProblemConfig, "x0": X0Config}
        for name, sub in sections.items():
            if name in data:
                kwargs[name] = _build_section(name, sub, data.pop(name))
        if "algorithm" in data:
            alg = dict(data.pop("algorithm") or {})
            if "init" in alg:
                alg["init_mode"] = alg.pop("init")
            kwargs["algorithm"] = _build_section("algorithm", AlgorithmSpec, alg)
        kwargs.update(data)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _build_section(name, cls, data):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{name}: unknown field(s): {', '.join(sorted(unknown))}")
    for key in ("eta", "beta"):
        if key in data and not _is_number(data[key]):
            raise ConfigError(f"{name}.{key}: expected a number, got {data[key]!r}")
    return cls(**data)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _require_int(name, value, minimum):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")


def _plain(obj):
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if k == "init_mode":
                k = "init"
            out[k] = _plain(v)
        return out
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (TopologyKind, WeightScheme, Variant, InitMode)):
        return obj.value
    return obj


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return RunConfig.from_dict(data or {})


def dump_config(config: RunConfig, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)


_FIELD_NOTES = {
    "topology.kind": "ring, hypercube, exponential, complete, path",
    "topology.n": "node count; ring needs n >= 3, hypercube a power of two",
    "topology.scheme": "metropolis, uniform (uniform needs a regular graph, else metropolis is used)",
    "problem.d": "parameter dimension",
    "problem.zeta2": "heterogeneity level: coordinates of b_i ~ Normal(0, zeta2 / i^2)",
    "problem.sigma2": "gradient-noise variance, E||eps||^2 = sigma2",
    "problem.seed": "seed for drawing the targets b_i",
    "algorithm.variant": "dsgd, dsgdm, gradient_tracking, momentum_tracking",
    "algorithm.eta": "step size",
    "algorithm.beta": "momentum coefficient in [0, 1); ignored by dsgd and gradient_tracking",
    "algorithm.init": "theorem, zero: initialization of momentum and corrector",
    "rounds": "number of synchronous rounds R",
    "seed": "seed of the gradient-noise stream",
    "cadence": "record metrics every k rounds (rounds 0 and R always recorded)",
    "x0.kind": "zeros, vector, sphere",
    "x0.values": "list of d numbers when kind is vector",
    "x0.radius": "sphere radius when kind is sphere",
    "x0.seed": "seed of the sphere draw",
    "window": "fraction of final rounds averaged by the heterogeneity verdict",
    "workers": "sweep worker processes (null: all available CPUs)",
}


def config_reference() -> str:
    """Markdown table of every config field with its default."""
    defaults = RunConfig().to_dict()
    rows = ["# Configuration reference", "", "Config files are YAML. Every field is optional.", ""]
    rows += ["| field | default | meaning |", "|---|---|---|"]

    def walk(prefix, obj):
        for k, v in obj.items():
            key = f"{prefix}{k}"
            if isinstance(v, dict):
                walk(key + ".", v)
            elif key != "schema_version":
                rows.append(f"| `{key}` | `{json.dumps(v)}` | {_FIELD_NOTES.get(key, '')} |")

    walk("", defaults)
    rows += ["", f"Outputs carry `schema_version: {SCHEMA_VERSION}`.", ""]
    return "\n".join(rows)
