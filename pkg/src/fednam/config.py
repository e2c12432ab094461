"""Run configuration: JSON round-trippable, strictly validated."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .control import ControlConfig
from .data import DATASET_KINDS, SplitSpec
from .errors import ConfigError
from .federation import FederationConfig
from .nn import ADAM, SGD
from .nn.layers import EXU, RELU


@dataclass
class DatasetConfig:
    kind: str = "heart"
    csv: str = ""
    target_col: str | None = None
    iris_binary: bool = False

    def __post_init__(self) -> None:
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"dataset.kind must be one of {DATASET_KINDS}, got {self.kind!r}")


@dataclass
class SplitConfig:
    test_fraction: float = 0.20
    val_fraction: float = 0.10
    stratified: bool = True

    def to_spec(self, seed: int) -> SplitSpec:
        return SplitSpec(self.test_fraction, self.val_fraction, self.stratified, seed)


@dataclass
class FederationSection:
    num_clients: int = 3
    rounds: int = 50
    local_epochs: int = 5
    aggregation: str = "both"

    def to_config(self, seed: int) -> FederationConfig:
        return FederationConfig(
            self.num_clients, self.rounds, self.local_epochs, self.aggregation, seed
        )


@dataclass
class ModelConfig:
    hidden_layers: int = 3
    hidden_units: int = 20
    unit_kind: str = RELU
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if self.unit_kind not in (RELU, EXU):
            raise ConfigError(f"model.unit_kind must be 'relu' or 'exu', got {self.unit_kind!r}")
        if self.hidden_layers < 1 or self.hidden_units < 1:
            raise ConfigError("model.hidden_layers and hidden_units must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"model.dropout must be in [0,1), got {self.dropout}")


@dataclass
class OptimizerConfig:
    kind: str = ADAM
    learning_rate: float = 1e-3

    def __post_init__(self) -> None:
        if self.kind not in (SGD, ADAM):
            raise ConfigError(f"optimizer.kind must be 'sgd' or 'adam', got {self.kind!r}")
        if self.learning_rate <= 0:
            raise ConfigError("optimizer.learning_rate must be > 0")


@dataclass
class GridConfig:
    """The four searched hyperparameters; the full Cartesian product is run."""

    dropout: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.3])
    learning_rate: list[float] = field(default_factory=lambda: [1e-2, 1e-3])
    hidden_layers: list[int] = field(default_factory=lambda: [2, 3])
    batch_size: list[int] = field(default_factory=lambda: [16, 32])

    def __post_init__(self) -> None:
        for name in ("dropout", "learning_rate", "hidden_layers", "batch_size"):
            if not getattr(self, name):
                raise ConfigError(f"grid.{name} must be non-empty")


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    federation: FederationSection = field(default_factory=FederationSection)
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    batch_size: int = 32
    threshold: float = 0.5
    out_dir: str = "runs/out"
    seed: int = 0
    jobs: int = 1
    svg: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must be in (0,1)")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


_SECTIONS = {
    "dataset": DatasetConfig,
    "split": SplitConfig,
    "federation": FederationSection,
    "model": ModelConfig,
    "optimizer": OptimizerConfig,
    "control": ControlConfig,
    "grid": GridConfig,
}


def _build_section(cls, doc: dict, where: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a JSON object")
    allowed = {f.name for f in fields(cls)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def config_from_dict(doc: dict) -> RunConfig:
    """Build and validate a RunConfig; unknown keys anywhere are rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    allowed = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in doc.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def config_to_dict(config: RunConfig) -> dict:
    return asdict(config)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(doc)


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=1, sort_keys=True))
