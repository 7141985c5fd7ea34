from __future__ import annotations

import logging
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel

from robust_tickets.adversarial import Forward, InputTransform, train_step
from robust_tickets.config import TrainConfig
from robust_tickets.data import augment as augment_batch
from robust_tickets.exceptions import TrainingDivergedError

from .optim import SGD
from .schedule import lr_at

logger = logging.getLogger(__name__)


class EpochRecord(BaseModel):
    stage: str
    epoch: int
    lr: float
    train_loss: float
    train_accuracy: float
    steps: int
    eval: dict[str, float] | None = None


class BatchSource(Protocol):
    def __len__(self) -> int: ...

    def batches(
        self, batch_size: int, rng: np.random.Generator | None = None
    ) -> Iterator[tuple[npt.NDArray[Any], npt.NDArray[Any]]]: ...


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Precomputed features with their labels, batched like a Dataset."""

    features: npt.NDArray[Any]
    labels: npt.NDArray[np.int64]

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def batches(
        self, batch_size: int, rng: np.random.Generator | None = None
    ) -> Iterator[tuple[npt.NDArray[Any], npt.NDArray[Any]]]:
        order = np.arange(len(self)) if rng is None else rng.permutation(len(self))
        for start in range(0, len(self), batch_size):
            index = order[start : start + batch_size]
            yield self.features[index], self.labels[index]


@dataclass
class TrainResult:
    history: list[EpochRecord] = field(default_factory=list)
    steps: int = 0

    @property
    def final(self) -> EpochRecord | None:
        return self.history[-1] if self.history else None


def _append_jsonl(path: Path, record: EpochRecord) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as handle:
        handle.write(record.model_dump_json() + "\n")


def fit(
    forward: Forward,
    optimizer: SGD,
    data: BatchSource,
    cfg: TrainConfig,
    *,
    rng: np.random.Generator,
    transform: InputTransform | None = None,
    augment: bool | None = None,
    stage: str = "train",
    log_path: Path | None = None,
    evaluate: Callable[[], dict[str, float]] | None = None,
) -> TrainResult:
    """Run ``cfg.epochs`` epochs of SGD under the step schedule.

    Batches are shuffled (and augmented when enabled) with ``rng``;
    ``transform`` then maps each clean batch to the inputs actually trained on.
    """
    augment = cfg.augment if augment is None else augment
    result = TrainResult()
    for epoch in range(cfg.epochs):
        optimizer.lr = lr_at(epoch, cfg)
        loss_sum, correct, seen = 0.0, 0, 0
        for x, y in data.batches(cfg.batch_size, rng):
            if augment:
                x = augment_batch(x, rng)
            if transform is not None:
                x = transform(x, y)
            try:
                outcome = train_step(forward, x, y, optimizer, step=result.steps)
            except TrainingDivergedError as exc:
                raise exc.at(epoch=epoch) from exc
            loss_sum += outcome.loss * outcome.size
            correct += outcome.correct
            seen += outcome.size
            result.steps += 1

        record = EpochRecord(
            stage=stage,
            epoch=epoch,
            lr=optimizer.lr,
            train_loss=loss_sum / max(seen, 1),
            train_accuracy=correct / max(seen, 1),
            steps=result.steps,
            eval=evaluate() if evaluate is not None else None,
        )
        result.history.append(record)
        logger.debug(
            f"[{stage}] epoch {epoch} lr={record.lr:.2e} "
            f"loss={record.train_loss:.4f} acc={record.train_accuracy:.4f}"
        )
        if log_path is not None:
            _append_jsonl(log_path, record)
    return result
