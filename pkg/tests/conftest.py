from __future__ import annotations

import pytest

from robust_tickets.config import NaturalScheme, TrainConfig
from robust_tickets.data import GeneratorConfig, ShiftConfig, Task, make_shifted_pair
from robust_tickets.nn import Checkpoint, micro
from robust_tickets.transfer import pretrain


@pytest.fixture(scope="session")
def generator_config() -> GeneratorConfig:
    return GeneratorConfig(num_classes=4, image_size=8, samples_per_class=12)


@pytest.fixture(scope="session")
def shifted_pair(generator_config: GeneratorConfig) -> tuple[Task, Task]:
    return make_shifted_pair(generator_config, ShiftConfig(magnitude=0.5))


@pytest.fixture
def quick_train() -> TrainConfig:
    return TrainConfig(
        epochs=2, batch_size=16, base_lr=0.05, decay_epochs=(1,), augment=False
    )


@pytest.fixture(scope="session")
def natural_checkpoint(shifted_pair: tuple[Task, Task]) -> Checkpoint:
    source, _ = shifted_pair
    spec = micro(num_classes=source.num_classes, input_shape=source.image_shape)
    cfg = TrainConfig(epochs=2, batch_size=16, decay_epochs=(), augment=False)
    return pretrain(spec, source, NaturalScheme(), cfg)
