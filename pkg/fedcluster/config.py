import json
import os
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from fedcluster.clustering import Linkage
from fedcluster.controller import ControllerMode
from fedcluster.federation.selection import SelectionMode
from fedcluster.nn.model_spec import Architecture
from fedcluster.similarity import Basis
from fedcluster.util.errors import ConfigError

DATA_DIR_ENV = "FEDCLUSTER_DATA_DIR"
IDX_PATH_FIELDS = ("train_images", "train_labels", "test_images", "test_labels")


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetKind(str, Enum):
    IDX = "IDX"
    SYNTH = "SYNTH"


class SynthSection(Section):
    n_groups: int = Field(default=4, ge=1)
    clients_per_group: int = Field(default=2, ge=1)
    dims: int = Field(default=2, ge=1)
    spread: float = Field(default=0.5, ge=0)
    samples_per_client: int = Field(default=64, ge=1)
    test_samples_per_group: int = Field(default=128, ge=1)


class DatasetSection(Section):
    kind: DatasetKind = DatasetKind.IDX
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    labels: List[int] = Field(default_factory=lambda: list(range(8)), min_length=1)
    test_label_filter: Optional[List[int]] = None
    labels_per_client: Optional[List[List[int]]] = None
    per_client_cap: Optional[int] = Field(default=None, ge=1)
    test_cap: Optional[int] = Field(default=None, ge=1)
    synth: Optional[SynthSection] = None

    @model_validator(mode="after")
    def validate_sources(self):
        if self.kind == DatasetKind.IDX:
            missing = [name for name in IDX_PATH_FIELDS if not getattr(self, name)]
            if missing:
                raise ValueError(f"IDX datasets need paths for: {', '.join(missing)}")
        elif self.synth is None:
            self.synth = SynthSection()
        if any(label < 0 for label in self.labels):
            raise ValueError(f"labels must be non-negative, got {self.labels}")
        return self


class ModelSection(Section):
    architecture: Architecture = Architecture.PAPER_CNN
    hidden_sizes: Optional[Tuple[int, ...]] = None
    conv_channels: Tuple[int, int] = (32, 64)
    lr: float = Field(default=0.01, gt=0)
    local_epochs: int = Field(default=1, ge=0)
    batch_size: int = Field(default=32, ge=1)


class FederationSection(Section):
    n_clients: int = Field(default=8, ge=2)
    rounds: int = Field(default=200, ge=1)
    warmup_rounds: int = Field(default=2, ge=1)
    policy: SelectionMode = SelectionMode.ADAPTIVE
    k: Optional[int] = Field(default=None, ge=1)
    similarity_basis: Basis = Basis.DELTA
    linkage: Linkage = Linkage.AVERAGE
    eval_every: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def validate_policy(self):
        if self.policy == SelectionMode.FEDSAUC_FIXED_K:
            if self.k is None:
                raise ValueError("policy FEDSAUC_FIXED_K needs k")
            if self.k > self.n_clients:
                raise ValueError(f"k={self.k} exceeds n_clients={self.n_clients}")
        if self.warmup_rounds > self.rounds:
            raise ValueError(
                f"warmup_rounds={self.warmup_rounds} exceeds rounds={self.rounds}"
            )
        return self


class ControllerSection(Section):
    mode: ControllerMode = ControllerMode.TCP
    w: float = Field(default=0.01, ge=0)
    hold_rounds: int = Field(default=5, ge=0)
    sa_temperature: float = Field(default=10.0, gt=0)


class OutputSection(Section):
    dir: str = "runs/latest"
    metrics_file: str = "metrics.jsonl"
    summary_file: str = "summary.json"


class SimConfig(Section):
    """A complete experiment: data, model, federation policy, controller, seed and outputs."""

    dataset: DatasetSection
    model: ModelSection = Field(default_factory=ModelSection)
    federation: FederationSection = Field(default_factory=FederationSection)
    controller: ControllerSection = Field(default_factory=ControllerSection)
    output: OutputSection = Field(default_factory=OutputSection)
    seed: int = Field(default=0, ge=0, lt=2**64)
    threads: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def validate_sections(self):
        n = self.federation.n_clients
        dataset = self.dataset
        if dataset.kind == DatasetKind.SYNTH:
            synth = dataset.synth
            if synth.n_groups * synth.clients_per_group != n:
                raise ValueError(
                    f"synth has {synth.n_groups} x {synth.clients_per_group} clients "
                    f"but federation.n_clients is {n}"
                )
            return self

        plan = self.labels_per_client()
        if len(plan) != n:
            raise ValueError(f"labels_per_client has {len(plan)} entries for {n} clients")
        unknown = sorted({label for labels in plan for label in labels} - set(dataset.labels))
        if unknown:
            raise ValueError(f"labels {unknown} are assigned to clients but filtered out")
        return self

    def labels_per_client(self) -> List[List[int]]:
        if self.dataset.labels_per_client is not None:
            return self.dataset.labels_per_client
        n = self.federation.n_clients
        return [[2 * (c // 2), 2 * (c // 2) + 1] for c in range(n)]


def _resolve(path: str, base: Path) -> str:
    candidate = Path(path).expanduser()
    if candidate.is_absolute():
        return str(candidate)
    if (base / candidate).exists() or not os.getenv(DATA_DIR_ENV):
        return str((base / candidate).resolve())
    return str((Path(os.environ[DATA_DIR_ENV]) / candidate).resolve())


def _format_errors(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        where = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {where}: {item['msg']}")
    return "Invalid config:\n" + "\n".join(lines)


def parse_config(path) -> SimConfig:
    """
    Loads and validates a JSON experiment config.

    Relative IDX paths are resolved against the config file's directory, falling back to
    $FEDCLUSTER_DATA_DIR when the file is not found there.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e

    try:
        config = SimConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_errors(e)) from e

    base = path.parent.resolve()
    for name in IDX_PATH_FIELDS:
        value = getattr(config.dataset, name)
        if value:
            setattr(config.dataset, name, _resolve(value, base))
    return config
