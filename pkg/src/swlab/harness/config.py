"""Run configuration: one versioned JSON document per experiment."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..dynamics import ChainKind
from ..exact.spaces import DEFAULT_STATE_CAP
from ..graph import Graph, graph_from_json
from ..measures import BoundaryCondition, ModelParams

SCHEMA_VERSION = 1

EXPERIMENTS = ("simulate", "exact", "mix-scaling", "couple", "shatter", "duality-check", "factorization-probe")

# fields each experiment cannot run without (beyond params)
_REQUIRED = {
    "simulate": ("graph", "chain", "steps"),
    "exact": ("graph", "chain"),
    "mix-scaling": ("sides",),
    "couple": ("graph",),
    "shatter": ("graph", "L"),
    "duality-check": ("graph",),
    "factorization-probe": ("graph",),
}


class ConfigError(ValueError):
    """The configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    params: dict
    graph: dict | None = None
    bc: dict | None = None
    chain: str | None = None
    steps: int | None = None
    t_cap: int = 10_000
    replicas: int = 1
    seed: int = 0
    observables: tuple = ("energy", "magnetization", "n_edges", "n_components")
    out: str | None = None
    series_csv: bool = False
    cap: int = DEFAULT_STATE_CAP
    options: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    # ---- derived objects

    def model(self) -> ModelParams:
        return ModelParams.from_mapping(self.params)

    def build_graph(self) -> Graph:
        return graph_from_json(self.graph)

    def boundary(self, g: Graph) -> BoundaryCondition:
        return BoundaryCondition.from_json(self.bc, g, self.model().q)

    def option(self, name, default=None):
        if name in self.options:
            return self.options[name]
        return default

    # ---- serialisation

    def to_json(self) -> dict:
        d = asdict(self)
        d["observables"] = list(self.observables)
        return d

    def content_hash(self) -> str:
        """Hash of everything that affects results (the output path excluded)."""
        d = self.to_json()
        d.pop("out", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_updates(self, **kw) -> "RunConfig":
        d = self.to_json()
        d.update({k: v for k, v in kw.items() if v is not None})
        return config_from_mapping(d)


_FIELDS = set(RunConfig.__dataclass_fields__)
# experiment-specific keys accepted at the top level and moved into ``options``
_OPTION_KEYS = {"sides", "L", "ell", "dim", "burn_in", "trials", "budget", "probe_seeds", "targets",
                "starts", "t_max", "n_random", "sigma_source", "refine_rounds"}


def config_from_mapping(spec: dict) -> RunConfig:
    if not isinstance(spec, dict):
        raise ConfigError("configuration must be a JSON object")
    spec = dict(spec)
    version = spec.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}, expected {SCHEMA_VERSION}")
    options = dict(spec.pop("options", None) or {})
    for k in list(spec):
        if k in _OPTION_KEYS:
            options[k] = spec.pop(k)
    unknown = set(spec) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    exp = spec.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
    if "params" not in spec:
        raise ConfigError("configuration needs params {q, beta | p}")
    for name in _REQUIRED[exp]:
        if spec.get(name) is None and options.get(name) is None:
            raise ConfigError(f"experiment {exp!r} needs {name!r}")
    if "observables" in spec:
        spec["observables"] = tuple(spec["observables"])
    cfg = RunConfig(options=options, **spec)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    try:
        cfg.model()
    except (KeyError, ValueError, TypeError) as err:
        raise ConfigError(f"bad params: {err}") from err
    if cfg.chain is not None:
        try:
            ChainKind(cfg.chain)
        except ValueError as err:
            raise ConfigError(f"unknown chain kind {cfg.chain!r}") from err
    for name in ("t_cap", "replicas", "cap"):
        if int(getattr(cfg, name)) < 1:
            raise ConfigError(f"{name} must be positive")
    if cfg.steps is not None and int(cfg.steps) < 0:
        raise ConfigError("steps must be non-negative")
    if int(cfg.seed) < 0:
        raise ConfigError("seed must be non-negative")
    if cfg.graph is not None:
        try:
            g = cfg.build_graph()
            cfg.boundary(g)
        except (KeyError, ValueError, TypeError) as err:
            raise ConfigError(f"bad graph or boundary condition: {err}") from err


def load_config(path) -> RunConfig:
    try:
        spec = json.loads(Path(path).read_text())
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    return config_from_mapping(spec)
