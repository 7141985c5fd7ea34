from __future__ import annotations

import os
from pathlib import Path
from string import Template
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from robust_tickets.config import (
    AdvConfig,
    AdversarialScheme,
    NaturalScheme,
    PretrainScheme,
    TrainConfig,
)
from robust_tickets.constants import (
    Granularity,
    InitScheme,
    PruneScope,
    PruningScheme,
    ScoreInit,
    TransferMode,
)
from robust_tickets.data import GeneratorConfig, ShiftConfig
from robust_tickets.nn.spec import REFERENCE_SPECS
from robust_tickets.pruning import ImpConfig


class DatasetPair(BaseModel):
    """Source and target task manifests written by ``save_dataset``."""

    model_config = ConfigDict(frozen=True)

    source: Path
    target: Path


class SyntheticPair(BaseModel):
    model_config = ConfigDict(frozen=True)

    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    shift: ShiftConfig = Field(default_factory=lambda: ShiftConfig(magnitude=0.75))


class PruningPlan(BaseModel):
    """One pruning scheme swept over a sparsity grid.

    IMP runs once per (checkpoint, seed) with the grid as its cumulative
    schedule; OMP and LMP draw one ticket per grid point.
    """

    model_config = ConfigDict(frozen=True)

    scheme: PruningScheme = "omp"
    sparsities: tuple[float, ...] = (0.0, 0.5, 0.9)
    granularity: Granularity = "element"
    scope: PruneScope = "global"
    imp: ImpConfig = Field(default_factory=ImpConfig)
    lmp_score_init: ScoreInit = "magnitude"

    @field_validator("sparsities")
    @classmethod
    def _check_grid(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("sparsity grid must not be empty")
        if any(not 0.0 <= s < 1.0 for s in value):
            raise ValueError(f"sparsities must lie in [0, 1): {value}")
        if len(set(value)) != len(value):
            raise ValueError(f"sparsities must be unique: {value}")
        return tuple(sorted(value))

    @model_validator(mode="after")
    def _check_scheme(self) -> PruningPlan:
        if self.scheme == "lmp" and self.granularity != "element":
            raise ValueError("lmp learns element-wise masks only")
        return self

    def imp_config(self) -> ImpConfig:
        return self.imp.model_copy(
            update={
                "schedule": self.sparsities,
                "granularity": self.granularity,
                "scope": self.scope,
            }
        )


class ExperimentConfig(BaseModel):
    """A full sweep: pretraining schemes x pruning plans x transfer modes x seeds."""

    model_config = ConfigDict(frozen=True)

    model: str = "mini18"
    init: InitScheme = "kaiming_uniform"
    datasets: DatasetPair | None = None
    synthetic: SyntheticPair = Field(default_factory=SyntheticPair)
    pretrain_schemes: tuple[PretrainScheme, ...] = (
        NaturalScheme(),
        AdversarialScheme(),
    )
    pruning: tuple[PruningPlan, ...] = (PruningPlan(),)
    transfer_modes: tuple[TransferMode, ...] = ("linear", "finetune")
    pretrain: TrainConfig = Field(default_factory=TrainConfig)
    prune_train: TrainConfig = Field(
        default_factory=lambda: TrainConfig(epochs=5, decay_epochs=())
    )
    finetune: TrainConfig = Field(default_factory=TrainConfig)
    adv: AdvConfig | None = Field(default_factory=AdvConfig)
    ood: bool = True
    fid: bool = True
    seeds: tuple[int, ...] = Field(default=(0,), min_length=1)
    out_dir: Path = Path("runs/experiment")

    @field_validator("model")
    @classmethod
    def _check_model(cls, value: str) -> str:
        if value not in REFERENCE_SPECS:
            known = ", ".join(sorted(REFERENCE_SPECS))
            raise ValueError(f"unknown model spec {value!r}; known: {known}")
        return value

    @model_validator(mode="after")
    def _check_axes(self) -> ExperimentConfig:
        names = [scheme.name for scheme in self.pretrain_schemes]
        if not names or len(set(names)) != len(names):
            raise ValueError(f"pretrain schemes must be non-empty and unique: {names}")
        modes = list(self.transfer_modes)
        if not modes or len(set(modes)) != len(modes):
            raise ValueError(f"transfer modes must be non-empty and unique: {modes}")
        if len(set(self.seeds)) != len(self.seeds) or min(self.seeds) < 0:
            raise ValueError(f"seeds must be unique and non-negative: {self.seeds}")
        plans = [(plan.scheme, plan.granularity, plan.scope) for plan in self.pruning]
        if not plans or len(set(plans)) != len(plans):
            raise ValueError("pruning plans must be non-empty and distinct")
        return self

    def cell_count(self) -> int:
        grid = sum(len(plan.sparsities) for plan in self.pruning)
        return (
            len(self.pretrain_schemes)
            * grid
            * len(self.transfer_modes)
            * len(self.seeds)
        )


def load_experiment_config(
    config_file: str | Path, **overrides: Any
) -> ExperimentConfig:
    """Read a YAML experiment file, expanding ``${VAR}`` from the environment."""
    file_path = Path(config_file) if isinstance(config_file, str) else config_file

    if not file_path.exists():
        raise FileNotFoundError(f"Configuration file {file_path} does not exist")

    env_sub_template = Template(file_path.read_text())
    file_env_parsed = env_sub_template.substitute(dict(os.environ))

    experiment_config = yaml.safe_load(file_env_parsed)
    if not isinstance(experiment_config, dict):
        raise ValueError("Configuration file must contain a dictionary")

    experiment_config.update(
        {key: value for key, value in overrides.items() if value is not None}
    )
    return ExperimentConfig.model_validate(experiment_config)


def dump_experiment_config(config: ExperimentConfig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False),
        encoding="utf-8",
    )
    return path
