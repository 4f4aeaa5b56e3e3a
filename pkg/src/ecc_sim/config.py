"""Experiment configuration: dataclass sections with defaults, YAML loading
with unknown-key rejection, and resolution into runtime objects."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import yaml

from ecc_sim.costs import CostConstants
from ecc_sim.exceptions import ConfigError
from ecc_sim.losses import LossWeights


@dataclass(frozen=True)
class DataConfig:
    source: str = "blobs"  # "blobs" or "csv"
    path: str | None = None  # csv source only
    n_classes: int = 8
    dim: int = 16
    n_per_class: int = 100
    spread: float = 0.3
    u: int = 4
    v: int = 2
    test_fraction: float = 0.25


@dataclass(frozen=True)
class EdgeConfig:
    hidden: tuple[int, ...] = (32,)
    tau: float = 0.5
    v_threshold: float = 1.0
    v_reset: float = 0.0
    surrogate_width: float = 1.0
    surrogate_mode: str = "hard"
    n_steps: int = 4
    tap_layer_index: int = -1


@dataclass(frozen=True)
class CloudConfig:
    hidden: tuple[int, ...] = (64, 32)
    feature_tap_index: int = 1
    perfect_oracle: bool = False
    epochs: int = 40
    lr: float = 0.1
    batch_size: int = 32


@dataclass(frozen=True)
class FilterSection:
    delta: float | tuple[float, ...] = 0.3

    @property
    def deltas(self) -> tuple[float, ...]:
        if isinstance(self.delta, (int, float)):
            return (float(self.delta),)
        return tuple(float(d) for d in self.delta)

    @property
    def is_sweep(self) -> bool:
        return not isinstance(self.delta, (int, float))


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 8
    batch_size: int = 32
    lr: float = 0.02
    momentum: float = 0.9
    update_epochs: int = 40
    update_lr: float = 0.01
    seed: int = 0
    ablate_seeds: int = 5  # number of consecutive seeds cmd_ablate runs


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    edge: EdgeConfig = field(default_factory=EdgeConfig)
    cloud: CloudConfig = field(default_factory=CloudConfig)
    losses: LossWeights = field(default_factory=LossWeights)
    filter: FilterSection = field(default_factory=FilterSection)
    train: TrainSection = field(default_factory=TrainSection)
    costs: CostConstants = field(default_factory=CostConstants)
    output: OutputConfig = field(default_factory=OutputConfig)

    def resolved(self) -> dict:
        """Full config with every default materialized, for the manifest."""
        return asdict(self)


_TUPLE_FIELDS = {"hidden", "delta"}


def _build_section(cls, raw: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in section {section!r}: "
                          f"{', '.join(sorted(unknown))}")
    converted = {}
    for key, value in raw.items():
        if key in _TUPLE_FIELDS and isinstance(value, list):
            converted[key] = tuple(value)
        else:
            converted[key] = value
    try:
        return cls(**converted)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section {section!r}: {exc}") from exc


_SECTIONS = {
    "data": DataConfig,
    "edge": EdgeConfig,
    "cloud": CloudConfig,
    "losses": LossWeights,
    "filter": FilterSection,
    "train": TrainSection,
    "costs": CostConstants,
    "output": OutputConfig,
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a mapping")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section_raw = raw.get(name, {})
        if not isinstance(section_raw, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        kwargs[name] = _build_section(cls, section_raw, name)
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(raw)
