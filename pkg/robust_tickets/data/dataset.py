from __future__ import annotations

import hashlib
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from robust_tickets.constants import INPUT_RANGE
from robust_tickets.exceptions import (
    DatasetError,
    DatasetShapeError,
    EmptyInputError,
    LabelOverflowError,
)

Batch = tuple[npt.NDArray[np.float32], npt.NDArray[np.int64]]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Images in ``[0, 1]`` laid out N x C x H x W with integer labels."""

    images: npt.NDArray[np.float32]
    labels: npt.NDArray[np.int64]
    num_classes: int
    name: str = "dataset"
    split: str = "train"

    def __post_init__(self) -> None:
        images = np.ascontiguousarray(self.images, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if images.ndim != 4:
            raise DatasetShapeError(f"{self.name}: images must be N x C x H x W")
        if labels.shape != (images.shape[0],):
            raise DatasetShapeError(
                f"{self.name}: {images.shape[0]} images but labels {labels.shape}"
            )
        if self.num_classes <= 0:
            raise DatasetError(f"{self.name}: num_classes must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise LabelOverflowError(
                f"{self.name}: labels must lie in [0, {self.num_classes}), "
                f"found {labels.min()}..{labels.max()}"
            )
        lo, hi = INPUT_RANGE
        if images.size and (images.min() < lo or images.max() > hi):
            raise DatasetError(f"{self.name}: image values outside [{lo}, {hi}]")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def image_shape(self) -> tuple[int, int, int]:
        _, c, h, w = self.images.shape
        return (c, h, w)

    @property
    def normalization(self) -> tuple[npt.NDArray[Any], npt.NDArray[Any]]:
        """Per-channel mean and standard deviation."""
        if not len(self):
            raise EmptyInputError(f"{self.name}: no images")
        return self.images.mean(axis=(0, 2, 3)), self.images.std(axis=(0, 2, 3))

    def subset(self, indices: npt.ArrayLike, split: str | None = None) -> Dataset:
        index = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.images[index],
            self.labels[index],
            self.num_classes,
            self.name,
            split or self.split,
        )

    def batches(
        self, batch_size: int, rng: np.random.Generator | None = None
    ) -> Iterator[Batch]:
        """Mini-batches in index order, or shuffled when ``rng`` is given."""
        order = np.arange(len(self)) if rng is None else rng.permutation(len(self))
        for start in range(0, len(self), batch_size):
            index = order[start : start + batch_size]
            yield self.images[index], self.labels[index]

    def digest(self) -> str:
        hasher = hashlib.sha256()
        hasher.update(f"{self.num_classes}{self.images.shape}".encode())
        hasher.update(self.images.tobytes())
        hasher.update(self.labels.tobytes())
        return hasher.hexdigest()


@dataclass(frozen=True, eq=False)
class Task:
    """A named classification problem with disjoint train and test splits."""

    name: str
    train: Dataset
    test: Dataset

    def __post_init__(self) -> None:
        if self.train.num_classes != self.test.num_classes:
            raise DatasetError(f"{self.name}: train and test class counts differ")
        if self.train.image_shape != self.test.image_shape:
            raise DatasetShapeError(f"{self.name}: train and test shapes differ")

    @property
    def num_classes(self) -> int:
        return self.train.num_classes

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.train.image_shape

    def digest(self) -> str:
        return hashlib.sha256(
            (self.train.digest() + self.test.digest()).encode()
        ).hexdigest()


def split_indices(
    n: int, test_fraction: float, rng: np.random.Generator
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    """Disjoint train/test index partition of ``range(n)``."""
    order = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    return np.sort(order[n_test:]), np.sort(order[:n_test])
