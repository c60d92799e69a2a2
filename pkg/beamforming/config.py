"""
Experiment configuration: dataclasses, TOML loading/dumping and validation.

Every key is optional. Sections map one-to-one onto the dataclasses below:
[system], [geometry], [pathloss], [circuit], [csi], [channel], [algorithm]
and [experiment]. Circuit values are SI (henry, ohm, farad).
"""

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import toml

from .channel import ChannelModelConfig, Cluster, CsiErrorModel, GeometryConfig, PathlossModel
from .circuit import CircuitParams
from .consensus_ris import build_graph, metropolis_weights
from .exceptions import ConfigError, GraphError
from .orchestrator import AlgoParams
from .system_model import SystemConfig

logger = logging.getLogger(__name__)

MODES = (
    "proposed",
    "no-coop",
    "no-coop-no-consensus",
    "random-caps",
    "midpoint-caps",
    "ff-calibrated",
)


@dataclass(frozen=True)
class SweepSettings:
    sweep: Tuple[float, ...] = (-10.0, 0.0, 10.0, 20.0, 30.0)
    realizations: int = 100
    mode: str = "proposed"
    master_seed: int = 0
    output: str = "sweep.csv"
    timing: bool = True
    workers: int = 1

    def validate(self) -> "SweepSettings":
        if not self.sweep:
            raise ConfigError("sweep must list at least one P_max value", key="experiment.sweep")
        if not self.realizations >= 1:
            raise ConfigError("realizations must be at least 1", key="experiment.realizations")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}", key="experiment.mode")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer", key="experiment.master_seed")
        if not self.workers >= 1:
            raise ConfigError("workers must be at least 1", key="experiment.workers")
        return self


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    pathloss: PathlossModel = field(default_factory=PathlossModel)
    circuit: CircuitParams = field(default_factory=CircuitParams)
    csi: CsiErrorModel = field(default_factory=CsiErrorModel)
    channel: ChannelModelConfig = field(default_factory=ChannelModelConfig)
    algorithm: AlgoParams = field(default_factory=AlgoParams)
    experiment: SweepSettings = field(default_factory=SweepSettings)

    def validate(self) -> "ExperimentConfig":
        self.system.validate()
        self.geometry.validate(self.system)
        self.pathloss.validate()
        self.circuit.validate()
        self.csi.validate()
        self.channel.validate(self.system)
        self.algorithm.validate()
        self.experiment.validate()
        try:
            graph = build_graph(self.algorithm.graph, self.system.B, self.algorithm.edges)
            metropolis_weights(list(graph.edges()), self.system.B)
        except GraphError as exc:
            raise ConfigError(str(exc), key="algorithm.edges") from exc
        return self

    def with_experiment(self, **overrides) -> "ExperimentConfig":
        return replace(self, experiment=replace(self.experiment, **overrides))

    def with_algorithm(self, **overrides) -> "ExperimentConfig":
        return replace(self, algorithm=replace(self.algorithm, **overrides))

    def with_system(self, **overrides) -> "ExperimentConfig":
        return replace(self, system=replace(self.system, **overrides))


SECTIONS = {
    "system": SystemConfig,
    "geometry": GeometryConfig,
    "pathloss": PathlossModel,
    "circuit": CircuitParams,
    "csi": CsiErrorModel,
    "channel": ChannelModelConfig,
    "algorithm": AlgoParams,
    "experiment": SweepSettings,
}


def _points(value: Any, key: str) -> Tuple[Tuple[float, ...], ...]:
    try:
        return tuple(tuple(float(x) for x in point) for point in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"expected a list of coordinate lists, got {value!r}", key=key) from exc


def _clusters(value: Any, key: str) -> Tuple[Cluster, ...]:
    clusters = []
    for entry in value:
        if not isinstance(entry, dict):
            raise ConfigError(f"cluster entries must be tables, got {entry!r}", key=key)
        unknown = set(entry) - {"center", "radius", "count"}
        if unknown:
            raise ConfigError(f"unknown cluster field(s) {sorted(unknown)}", key=f"{key}.{sorted(unknown)[0]}")
        try:
            clusters.append(
                Cluster(
                    center=tuple(float(x) for x in entry["center"])[:2],
                    radius=float(entry.get("radius", 2.0)),
                    count=int(entry["count"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid cluster {entry!r}", key=key) from exc
    return tuple(clusters)


def _coerce(default: Any, value: Any, key: str) -> Any:
    name = key.rsplit(".", 1)[-1]
    if key in ("geometry.bs_positions", "geometry.ris_positions"):
        return _points(value, key)
    if key == "geometry.clusters":
        return _clusters(value, key)
    if key == "algorithm.edges":
        try:
            return tuple((int(i), int(j)) for i, j in value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"edges must be pairs of BS indices, got {value!r}", key=key) from exc
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false", key=key)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer", key=key)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number", key=key)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string", key=key)
        return value
    if isinstance(default, tuple):
        try:
            return tuple(float(x) for x in value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name} must be a list of numbers", key=key) from exc
    return value


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """Builds and validates a config from parsed TOML; unknown sections or keys are errors."""
    sections = {}
    for section, values in data.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", key=section)
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table", key=section)
        cls = SECTIONS[section]
        defaults = cls()
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for name, value in values.items():
            key = f"{section}.{name}"
            if name not in known:
                raise ConfigError(f"unknown key '{key}'", key=key)
            kwargs[name] = _coerce(getattr(defaults, name), value, key)
        sections[section] = cls(**kwargs)
    return ExperimentConfig(**sections).validate()


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", key="config")
    try:
        data = toml.load(path)
    except toml.TomlDecodeError as exc:
        logger.error(f"Could not parse {path}: {exc}")
        raise ConfigError(f"could not parse {path}: {exc}", key="config") from exc
    config = config_from_dict(data)
    logger.info(f"Loaded experiment config from {path}")
    return config


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def config_to_dict(config: ExperimentConfig) -> Dict[str, Any]:
    return _plain(asdict(config))


def dump_config(config: ExperimentConfig, path: Optional[Union[str, Path]] = None) -> str:
    """TOML text of the config (written to `path` when given); load_config reads it back unchanged."""
    text = toml.dumps(config_to_dict(config))
    if path is not None:
        Path(path).write_text(text)
    return text


def desk_scale_config() -> ExperimentConfig:
    """Reduced instance small enough for CI: 2 BSs, 1 RIS of 16 elements, 8 subcarriers."""
    return ExperimentConfig(
        system=SystemConfig(B=2, N=2, U=2, R=1, M=16, K=8),
        geometry=GeometryConfig(
            ris_positions=((65.0, 60.0, 6.0),),
            clusters=(Cluster((67.5, 57.5), 2.0, 1), Cluster((82.5, 57.5), 2.0, 1)),
        ),
        algorithm=AlgoParams(t_max=500),
        experiment=SweepSettings(realizations=20),
    ).validate()
