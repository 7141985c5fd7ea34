from __future__ import annotations

import numpy as np

from robust_tickets.data import (
    GeneratorConfig,
    ShiftConfig,
    Task,
    make_ood_dataset,
    make_shifted_pair,
)


def test_pair_shares_labels_and_partition(
    generator_config: GeneratorConfig, shifted_pair: tuple[Task, Task]
) -> None:
    source, target = shifted_pair

    assert source.num_classes == target.num_classes == generator_config.num_classes
    assert source.image_shape == (3, 8, 8)
    assert len(source.train) + len(source.test) == generator_config.num_samples
    np.testing.assert_array_equal(source.train.labels, target.train.labels)
    np.testing.assert_array_equal(source.test.labels, target.test.labels)
    assert not np.array_equal(source.train.images, target.train.images)


def test_zero_shift_reproduces_the_source(generator_config: GeneratorConfig) -> None:
    source, target = make_shifted_pair(generator_config, ShiftConfig(magnitude=0.0))

    np.testing.assert_array_equal(source.train.images, target.train.images)
    np.testing.assert_array_equal(source.test.images, target.test.images)


def test_generation_is_deterministic(generator_config: GeneratorConfig) -> None:
    first, _ = make_shifted_pair(generator_config, ShiftConfig())
    second, _ = make_shifted_pair(generator_config, ShiftConfig())
    reseeded, _ = make_shifted_pair(
        generator_config.model_copy(update={"seed": 1}), ShiftConfig()
    )

    assert first.digest() == second.digest()
    assert first.digest() != reseeded.digest()


def test_larger_shift_moves_further_from_the_source(
    generator_config: GeneratorConfig,
) -> None:
    def distance(magnitude: float) -> float:
        source, target = make_shifted_pair(
            generator_config, ShiftConfig(magnitude=magnitude)
        )
        return float(np.abs(source.train.images - target.train.images).mean())

    assert 0.0 < distance(0.25) < distance(1.0)


def test_ood_images_are_valid_and_distinct(
    generator_config: GeneratorConfig, shifted_pair: tuple[Task, Task]
) -> None:
    ood = make_ood_dataset(generator_config, n=20)

    assert len(ood) == 20
    assert ood.image_shape == shifted_pair[0].image_shape
    assert 0.0 <= ood.images.min() and ood.images.max() <= 1.0
    assert ood.digest() != make_ood_dataset(generator_config, n=20, seed=5).digest()


def test_texture_free_images_ignore_the_texture_shift(
    generator_config: GeneratorConfig,
) -> None:
    flat = generator_config.model_copy(update={"texture_contrast": 0.0})
    texture_only = ShiftConfig(magnitude=1.0, color_shift=0.0, noise_sigma=0.0)

    source, target = make_shifted_pair(flat, texture_only)
    striped, restriped = make_shifted_pair(generator_config, texture_only)

    np.testing.assert_allclose(source.train.images, target.train.images, atol=1e-6)
    assert not np.allclose(striped.train.images, restriped.train.images)
