from __future__ import annotations

from itertools import pairwise
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .constants import INPUT_RANGE, AdvInit


class AdvConfig(BaseModel):
    """L-infinity PGD threat model; epsilon and step size in input units."""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(default=8 / 255, ge=0.0)
    steps: int = Field(default=7, ge=1)
    step_size: float = Field(default=2 / 255, gt=0.0)
    init: AdvInit = "zero"
    track_best: bool = True
    clip_min: float = INPUT_RANGE[0]
    clip_max: float = INPUT_RANGE[1]

    @model_validator(mode="after")
    def _check_range(self) -> AdvConfig:
        if self.clip_max <= self.clip_min:
            raise ValueError("clip_max must be greater than clip_min")
        return self


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default=30, gt=0)
    batch_size: int = Field(default=64, gt=0)
    base_lr: float = Field(default=0.01, gt=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=1e-4, ge=0.0)
    lr_decay_factor: float = Field(default=0.1, gt=0.0)
    decay_epochs: tuple[int, ...] = (10, 20)
    seed: int = Field(default=0, ge=0)
    augment: bool = True

    @model_validator(mode="after")
    def _check_schedule(self) -> TrainConfig:
        if any(epoch <= 0 for epoch in self.decay_epochs):
            raise ValueError("decay_epochs must be positive")
        if any(a >= b for a, b in pairwise(self.decay_epochs)):
            raise ValueError("decay_epochs must be strictly increasing")
        if self.decay_epochs and self.epochs <= self.decay_epochs[-1]:
            raise ValueError("epochs must exceed the last decay epoch")
        return self

    @classmethod
    def scaled(cls, scale: float = 0.2, **overrides: object) -> TrainConfig:
        """150 epochs with drops at 50 and 100, scaled to ``scale``."""
        epochs = max(3, round(150 * scale))
        decay = (max(1, round(50 * scale)), max(2, round(100 * scale)))
        values: dict[str, object] = {
            "epochs": epochs,
            "decay_epochs": decay,
            "batch_size": 64,
            "momentum": 0.9,
            "weight_decay": 1e-4,
        }
        values.update(overrides)
        return cls.model_validate(values)


class NaturalScheme(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: Literal["natural"] = "natural"


class AdversarialScheme(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: Literal["adversarial"] = "adversarial"
    adv: AdvConfig = Field(default_factory=AdvConfig)


class SmoothingScheme(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: Literal["random_smoothing"] = "random_smoothing"
    sigma: float = Field(default=0.25, ge=0.0)


PretrainScheme = Annotated[
    NaturalScheme | AdversarialScheme | SmoothingScheme,
    Field(discriminator="name"),
]
