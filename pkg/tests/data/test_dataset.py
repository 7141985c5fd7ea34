from __future__ import annotations

import numpy as np
import pytest

from robust_tickets.data import Dataset, Task, augment, flip_horizontal, split_indices
from robust_tickets.exceptions import (
    DatasetError,
    DatasetShapeError,
    EmptyInputError,
    LabelOverflowError,
)


def _images(n: int, size: int = 4) -> np.ndarray:
    return np.random.default_rng(0).random((n, 3, size, size)).astype(np.float32)


def test_dataset_validation() -> None:
    with pytest.raises(DatasetShapeError):
        Dataset(np.zeros((2, 4, 4), dtype=np.float32), np.zeros(2), 2)
    with pytest.raises(DatasetShapeError):
        Dataset(_images(3), np.zeros(2), 2)
    with pytest.raises(LabelOverflowError):
        Dataset(_images(2), np.array([0, 2]), 2)
    with pytest.raises(DatasetError, match="outside"):
        Dataset(_images(2) + 1.5, np.array([0, 1]), 2)
    with pytest.raises(DatasetError):
        Dataset(_images(2), np.array([0, 0]), 0)


def test_batches_cover_every_sample_once() -> None:
    data = Dataset(_images(10), np.arange(10) % 3, 3)

    ordered = [labels for _, labels in data.batches(4)]
    shuffled = np.concatenate(
        [labels for _, labels in data.batches(4, np.random.default_rng(1))]
    )

    assert [len(labels) for labels in ordered] == [4, 4, 2]
    np.testing.assert_array_equal(np.concatenate(ordered), data.labels)
    np.testing.assert_array_equal(np.sort(shuffled), np.sort(data.labels))


def test_subset_and_normalization() -> None:
    data = Dataset(_images(6), np.arange(6) % 2, 2, "toy")

    part = data.subset([0, 2], "test")
    mean, std = data.normalization

    assert len(part) == 2 and part.split == "test" and part.name == "toy"
    assert mean.shape == (3,) and std.shape == (3,)
    with pytest.raises(EmptyInputError):
        _ = data.subset([]).normalization


def test_task_requires_matching_splits() -> None:
    train = Dataset(_images(4), np.zeros(4), 2)

    with pytest.raises(DatasetError):
        Task("bad", train, Dataset(_images(2), np.zeros(2), 3))
    with pytest.raises(DatasetShapeError):
        Task("bad", train, Dataset(_images(2, size=6), np.zeros(2), 2))


def test_split_indices_partition() -> None:
    train, test = split_indices(50, 0.2, np.random.default_rng(3))

    assert len(test) == 10
    assert not set(train) & set(test)
    assert sorted([*train, *test]) == list(range(50))


def test_augment_flip_and_crop() -> None:
    images = _images(3, size=6)
    rng = np.random.default_rng(0)

    assert augment(images, rng, enabled=False) is images
    flipped = augment(images, rng, crop_padding=0, force_flip=True)
    np.testing.assert_array_equal(flipped, flip_horizontal(images))
    unchanged = augment(images, rng, crop_padding=0, force_flip=False)
    np.testing.assert_array_equal(unchanged, images)

    cropped = augment(images, rng, crop_padding=2)
    assert cropped.shape == images.shape
    assert cropped.dtype == np.float32
